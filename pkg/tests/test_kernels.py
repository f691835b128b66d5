import itertools

import pytest

from multiscale_bft.adversary import SCRIPT_FAMILY, AdversarySpec
from multiscale_bft.kernels import (
    KernelConfig,
    KernelPreconditionError,
    PhaseKing,
    kernel_rounds,
    majority_relay,
    run_differential_ba_Bs,
    run_immediate_ba_As,
    run_initiation_Is,
)


class TestMajorityRelay:
    def test_strict_majority(self):
        assert majority_relay([1, 1, 0]) == 1
        assert majority_relay([2, None, 2, 3]) == 2

    def test_tie_goes_to_lowest(self):
        assert majority_relay([3, 1, 3, 1]) == 1
        assert majority_relay([4, 5, 6]) == 4

    def test_empty(self):
        with pytest.raises(ValueError):
            majority_relay([None, None])


def test_round_counts():
    assert [kernel_rounds(s) for s in (4, 7, 10, 16)] == [6, 9, 12, 18]
    pk = PhaseKing(7)
    assert (pk.f, pk.keep) == (2, 5)
    with pytest.raises(ValueError):
        PhaseKing(6, 2)


def check(outcome, inputs, corrupt, s):
    correct = [v for v in range(s) if v not in corrupt]
    assert set(outcome.decisions) == set(correct)
    assert outcome.agreed
    vals = {inputs[v] for v in correct}
    if len(vals) == 1:
        assert outcome.value == vals.pop()
    # differential validity: s-f correct holders of v force v
    f = s // 3
    for v in vals:
        if sum(inputs[u] == v for u in correct) >= s - f:
            assert outcome.value == v


class TestExhaustiveSmall:
    """s=4 (f=1): every input vector, every single fault, every script."""

    @pytest.mark.parametrize("script", SCRIPT_FAMILY)
    def test_all_cases(self, script):
        cfg = KernelConfig.of_size(4)
        for bits in itertools.product((0, 1), repeat=4):
            inputs = dict(enumerate(bits))
            for fault in [(), *((v,) for v in range(4))]:
                adv = AdversarySpec.of(fault, strategy=script, seed=sum(bits))
                out = run_immediate_ba_As(cfg, inputs, adv)
                assert out.rounds == 6
                check(out, inputs, set(fault), 4)


class TestSeven:
    def test_two_round_counterexample_is_handled(self):
        # F={1,2}, equivocation: the case that splits a 2-round-per-phase king
        cfg = KernelConfig.of_size(7)
        inputs = dict(enumerate([1, 0, 0, 1, 1, 0, 0]))
        out = run_immediate_ba_As(cfg, inputs, AdversarySpec.of({1, 2}, strategy="equivocate"))
        assert out.agreed and out.rounds == 9

    @pytest.mark.parametrize("script", SCRIPT_FAMILY)
    def test_differential_validity(self, script):
        cfg = KernelConfig.of_size(7)
        # five correct members hold 1, faulty members push 0
        inputs = {0: 1, 1: 1, 2: 1, 3: 1, 4: 1, 5: 0, 6: 0}
        out = run_differential_ba_Bs(cfg, inputs, AdversarySpec.of({5, 6}, strategy=script))
        assert out.value == 1

    def test_non_binary_values(self):
        cfg = KernelConfig.of_size(7)
        inputs = {v: 40 + v % 3 for v in range(7)}
        out = run_immediate_ba_As(cfg, inputs, AdversarySpec.of({0, 3}, strategy="random", seed=2))
        check(out, inputs, {0, 3}, 7)

    def test_precondition(self):
        cfg = KernelConfig.of_size(7)
        with pytest.raises(KernelPreconditionError):
            run_immediate_ba_As(cfg, dict.fromkeys(range(7), 0), AdversarySpec.of({0, 1, 2}))

    def test_message_bound(self):
        out = run_immediate_ba_As(KernelConfig.of_size(7), dict.fromkeys(range(7), 1))
        # 6 broadcast rounds to 6 peers, plus at most one king round each
        assert max(out.messages.values()) == 6 * 6 + 6


class TestInitiation:
    def test_counterparts(self, cube72):
        got = run_initiation_Is(cube72, {v: 1 for v in range(7)}, 0, 3, 2)
        assert got == {v: 1 for v in range(21, 28)}

    def test_faulty_source_only_hits_its_counterpart(self, cube72):
        adv = AdversarySpec.of({2}, strategy="silent")
        got = run_initiation_Is(cube72, {v: 1 for v in range(7)}, 0, 3, 2, adv)
        assert got[23] == 0
        assert all(got[v] == 1 for v in range(21, 28) if v != 23)

    def test_rejects_bad_dimension(self, cube72):
        with pytest.raises(ValueError):
            run_initiation_Is(cube72, {}, 0, 3, 1)
