import json

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError as PydanticValidationError

from behavior_tools.ingest import labels_by_account, read_events, read_labels
from behavior_tools.sequence import build_pairs, build_sequences
from behavior_tools.synthgen import (
    ArchetypeSpec,
    chain_to_events,
    cluster_archetypes,
    default_archetypes,
    generate_account,
    generate_dataset,
    get_archetype,
    reachable_codes,
    read_archetypes,
    sample_chain,
    total_variation,
    write_corpus,
)
from config import SynthConfig
from trollscope.exceptions import ConfigError
from trollscope.models import AccountClass


def uniform_spec(**overrides):
    row = [0.0, 0.0, 0.0] + [1 / 8] * 8
    data = dict(name="flat", initial=row, transition=[row] * 11, min_length=5, max_length=10)
    data.update(overrides)
    return ArchetypeSpec(**data)


def test_events_compile_back_to_the_chain():
    rng = np.random.default_rng(0)
    for spec in list(default_archetypes()) + cluster_archetypes():
        for _ in range(20):
            chain = sample_chain(spec, int(rng.integers(1, 200)), rng)
            events = chain_to_events(chain, "acct", rng)
            assert build_pairs(events, "acct").codes().tolist() == chain.tolist()
            stamps = [e.timestamp for e in events]
            assert all(a < b for a, b in zip(stamps, stamps[1:]))


def test_generated_account_lengths_within_bounds():
    spec = default_archetypes()[1].with_lengths(30, 40)
    for i in range(10):
        seq, events = generate_account(spec, np.random.default_rng(i), "u")
        assert 30 <= len(seq) <= 40
        assert build_pairs(events, "u") == seq


def test_total_variation_properties():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p, q = rng.dirichlet(np.ones(11)), rng.dirichlet(np.ones(11))
        assert total_variation(p, p) == 0.0
        assert total_variation(p, q) == pytest.approx(total_variation(q, p))
        assert 0.0 <= total_variation(p, q) <= 1.0


@pytest.mark.parametrize("mixing", [0.0, 0.3, 0.7, 1.0])
def test_mixing_shrinks_class_distance(mixing):
    troll, user = default_archetypes()
    pos, neg = troll.blend(user, mixing), user.blend(troll, mixing)
    for row in range(11):
        before = total_variation(troll.transition_array[row], user.transition_array[row])
        after = total_variation(pos.transition_array[row], neg.transition_array[row])
        assert after == pytest.approx((1.0 - mixing) * before, abs=1e-12)


def test_full_mixing_makes_classes_identical():
    troll, user = default_archetypes()
    np.testing.assert_allclose(troll.blend(user, 1.0).transition_array, user.blend(troll, 1.0).transition_array)
    with pytest.raises(ConfigError):
        troll.blend(user, 1.5)


def test_empirical_transitions_converge():
    spec = default_archetypes()[1]
    chain = sample_chain(spec, 200_000, np.random.default_rng(2))
    counts = np.zeros((11, 11))
    np.add.at(counts, (chain[:-1], chain[1:]), 1)
    for row in range(11):
        if counts[row].sum() > 20_000:
            empirical = counts[row] / counts[row].sum()
            assert total_variation(empirical, spec.transition_array[row]) < 0.03


def test_troll_never_goes_silent():
    troll = default_archetypes()[0]
    assert 6 not in reachable_codes(troll) and 10 not in reachable_codes(troll)
    assert set(reachable_codes(get_archetype("conversationalist"))) == {7, 9, 10}


@pytest.mark.parametrize("overrides", [
    {"initial": [0.5] * 11},
    {"transition": [[1 / 11] * 11] * 11},
    {"min_length": 20, "max_length": 10},
    {"initial": [1.0] + [0.0] * 10, "transition": [[0.5, 0.5] + [0.0] * 9] * 11},
])
def test_invalid_archetypes(overrides):
    with pytest.raises(PydanticValidationError):
        uniform_spec(**overrides)


def test_unknown_archetype():
    with pytest.raises(ConfigError):
        get_archetype("lurker")


def test_dataset_is_seeded_per_account():
    small = generate_dataset(SynthConfig(n_accounts=3, min_length=20, max_length=30, rng_seed=5))
    large = generate_dataset(SynthConfig(n_accounts=5, min_length=20, max_length=30, rng_seed=5))
    other = generate_dataset(SynthConfig(n_accounts=3, min_length=20, max_length=30, rng_seed=6))
    for account_id, seq in small.sequences.items():
        assert large.sequences[account_id] == seq
    assert small.sequences != other.sequences
    parallel = generate_dataset(SynthConfig(n_accounts=3, min_length=20, max_length=30, rng_seed=5), n_jobs=2)
    assert parallel.sequences == small.sequences


def test_imbalanced_io_driver_corpus():
    corpus = generate_dataset(SynthConfig(
        n_positive=2, n_negative=6, positive_class_name="io_driver", min_length=10, max_length=12,
    ))
    labels = labels_by_account(corpus.labels)
    assert sum(l is AccountClass.POSITIVE for l in labels.values()) == 2
    assert sorted(a for a in labels if a.startswith("io_driver_")) == ["io_driver_00000", "io_driver_00001"]


def test_written_corpus_ingests_to_the_same_sequences(tmp_path):
    corpus = generate_dataset(SynthConfig(n_accounts=4, min_length=15, max_length=25, mixing=0.3, rng_seed=1))
    paths = write_corpus(corpus, tmp_path)

    sequences = build_sequences(read_events(paths["events"]))
    assert sequences == corpus.sequences
    assert labels_by_account(read_labels(paths["labels"])) == labels_by_account(corpus.labels)

    frame = pd.read_csv(paths["labels"])
    assert list(frame.columns) == ["account_id", "class"]
    positive, negative = read_archetypes(paths["archetypes"])
    assert positive == corpus.positive_archetype
    assert json.loads(paths["archetypes"].read_text())["negative"]["name"] == "user"


def test_thousand_generated_accounts_round_trip():
    archetypes = [spec.with_lengths(1, 150) for spec in list(default_archetypes()) + cluster_archetypes()]
    rng = np.random.default_rng(11)
    for i in range(1000):
        spec = archetypes[i % len(archetypes)]
        account_id = f"acct_{i}"
        seq, events = generate_account(spec, rng, account_id)
        assert build_pairs(events, account_id) == seq
        assert len(seq) <= len(events) <= 2 * len(seq)


def test_troll_rows_are_feedback_insensitive():
    troll = default_archetypes()[0]
    rows = troll.transition_array
    reachable = reachable_codes(troll)
    worst = max(total_variation(rows[a], rows[b]) for a in reachable for b in reachable)
    assert worst < 0.1


def test_user_rows_depend_on_state():
    user = default_archetypes()[1]
    rows = user.transition_array
    worst = max(total_variation(rows[a], rows[b]) for a in range(11) for b in range(11))
    assert worst > 0.5
