"""OptionSet/OptionSpec invariants and the ablation menu builders."""

import numpy as np
import pytest

from sol.options import (
    DEFAULT_LENGTHS, OptionSet, OptionSpec, PolicyIndex, RewardKind, one_hot,
    with_duplicate_options, with_useless_options,
)


def specs(n):
    return tuple(OptionSpec(i, f"o{i}", RewardKind.TASK_REWARD) for i in range(n))


def test_controller_is_last_policy_index():
    opts = OptionSet(options=specs(3))
    assert opts.num_options == 3
    assert opts.num_policies == 4
    assert opts.controller_index == 3
    assert PolicyIndex(3, 3).is_controller
    assert not PolicyIndex(0, 3).is_controller


def test_default_length_menu():
    assert OptionSet(options=specs(1)).lengths == DEFAULT_LENGTHS


@pytest.mark.parametrize("bad", [
    dict(options=()),
    dict(options=specs(2), lengths=()),
    dict(options=specs(2), lengths=(0, 2)),
    dict(options=specs(2), lengths=(4, 2)),
    dict(options=specs(2), lengths=(2, 2)),
    dict(options=specs(2), controller_entropy_scale_extra=0.5),
])
def test_option_set_rejects_bad_shapes(bad):
    with pytest.raises(ValueError):
        OptionSet(**bad)


def test_option_ids_must_be_dense_and_ordered():
    with pytest.raises(ValueError, match="ids"):
        OptionSet(options=(OptionSpec(1, "a", RewardKind.ZERO),))


def test_option_spec_validation():
    with pytest.raises(ValueError):
        OptionSpec(-1, "a", RewardKind.ZERO)
    with pytest.raises(ValueError):
        OptionSpec(0, "a", RewardKind.ZERO, reward_scale=float("nan"))
    with pytest.raises(TypeError):
        OptionSpec(0, "a", "delta_gold")


def test_policy_index_range():
    with pytest.raises(ValueError):
        PolicyIndex(4, 3)
    with pytest.raises(ValueError):
        PolicyIndex(-1, 3)


def test_one_hot():
    assert np.array_equal(one_hot(1, 3), [0.0, 1.0, 0.0])
    with pytest.raises(IndexError):
        one_hot(3, 3)


def test_with_duplicate_options():
    base = OptionSet(options=(OptionSpec(0, "a", RewardKind.DELTA_GOLD, 2.0),
                              OptionSpec(1, "b", RewardKind.AT_STAIRS)))
    dup = with_duplicate_options(base, copies=1)
    assert dup.num_options == 4
    assert [o.name for o in dup.options] == ["a", "a2", "b", "b2"]
    assert [o.id for o in dup.options] == [0, 1, 2, 3]
    assert dup.options[1].reward_kind is RewardKind.DELTA_GOLD
    assert dup.options[1].reward_scale == 2.0
    assert dup.lengths == base.lengths


def test_with_useless_options():
    base = OptionSet(options=specs(2))
    ext = with_useless_options(base, (OptionSpec(0, "noop", RewardKind.ZERO),
                                      OptionSpec(0, "scout", RewardKind.SCOUT)))
    assert ext.num_options == 4
    assert [o.id for o in ext.options] == [0, 1, 2, 3]
    assert ext.options[2].reward_kind is RewardKind.ZERO
    assert ext.options[3].reward_kind is RewardKind.SCOUT


def test_reward_kind_values_are_unique():
    values = [k.value for k in RewardKind]
    assert len(values) == len(set(values))
