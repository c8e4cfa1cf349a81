import numpy as np
import pytest
from scipy import stats

from conftest import binomial_sigma
from sbb84.errors import ImbalancedSift, InsufficientSiftedBits
from sbb84.gf2 import BitVec
from sbb84.privacy import KeyLengthRule
from sbb84.qsim import Basis, ChannelParams, InterceptResend
from sbb84.session import (
    CheckEstimate,
    MeasureRecords,
    PrepRecords,
    ProtocolConfig,
    SiftedData,
    abort_decision,
    alice_prepare_batch,
    estimate_errors,
    replay_key,
    run_session,
    select_check_bits,
    sift,
    transmit_and_measure,
)
from sbb84.transcript import SeedStreams, SessionTranscript


def fake_sifted(bases):
    bases = np.asarray(bases, dtype=np.uint8)
    zeros = BitVec.zeros(bases.size)
    return SiftedData(np.arange(bases.size), zeros, zeros, bases)


class TestConfig:
    def test_qubit_count(self):
        assert ProtocolConfig(n=1000, delta=0.2).n_qubits == 4200
        assert ProtocolConfig(n=7, delta=0.3).n_qubits == 31

    @pytest.mark.parametrize("kw", [{"n": 0}, {"m": 100}, {"delta": -1}, {"eta": 0.0}, {"seed": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ProtocolConfig(**kw)

    def test_flat_round_trip(self):
        cfg = ProtocolConfig(n=300, channel=ChannelParams(0.02, 0.03, 0.01), eve=InterceptResend(0.5), seed=9)
        assert ProtocolConfig.from_flat(cfg.to_flat()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="bogus"):
            ProtocolConfig.from_flat({"bogus": 1})


class TestPrepareAndMeasure:
    def test_x_basis_fraction(self):
        cfg = ProtocolConfig(n=25_000, delta=0.0)
        prep, states = alice_prepare_batch(cfg, SeedStreams(1))
        n = prep.bases.size
        assert n == 100_000
        assert abs(np.mean(prep.bases == Basis.X) - 0.25) <= 3 * binomial_sigma(0.25, n)
        assert np.array_equal(prep.bases == Basis.X, prep.w == 1)
        assert np.array_equal(states, 2 * prep.bases + prep.bits)

    def test_bit_error_rate(self):
        cfg = ProtocolConfig(n=25_000, channel=ChannelParams(0.1, 0.0, 0.0))
        streams = SeedStreams(2)
        prep, states = alice_prepare_batch(cfg, streams)
        bob = transmit_and_measure(states, cfg, streams)
        same = prep.bases == bob.bases
        z = same & (prep.bases == Basis.Z)
        rate = np.mean(prep.bits[z] != bob.bits[z])
        assert abs(rate - 0.1) <= 3 * binomial_sigma(0.1, int(z.sum()))
        x = same & (prep.bases == Basis.X)
        assert np.all(prep.bits[x] == bob.bits[x])

    def test_sift_hand_trace(self):
        alice = PrepRecords(np.array([1, 2, 3]), np.array([1, 0, 0], dtype=np.uint8), np.array([1, 0, 1], dtype=np.uint8))
        bob = MeasureRecords(np.array([1, 1, 0], dtype=np.uint8), np.array([1, 1, 0], dtype=np.uint8))
        t = SessionTranscript()
        s = sift(alice, bob, t)
        assert s.positions.tolist() == [0, 2]
        assert (str(s.alice_bits), str(s.bob_bits)) == ("11", "10")
        assert [(r.sender, r.kind) for r in t] == [("A", "bases"), ("B", "bases")]
        with pytest.raises(InsufficientSiftedBits):
            sift(alice, bob, min_kept=3)

    def test_sift_shortfall_rare(self):
        cfg = ProtocolConfig(n=1000, delta=0.2)
        short = 0
        for seed in range(1000):
            streams = SeedStreams(seed)
            prep, states = alice_prepare_batch(cfg, streams)
            bob = transmit_and_measure(states, cfg, streams)
            short += int(np.sum(prep.bases == bob.bases)) < 2 * cfg.n
        assert short / 1000 < 0.01

    def test_default_delta_covers_selection(self):
        # Z-basis survivors must cover the X-check count plus n code bits, not just 2n in total
        cfg = ProtocolConfig(n=1000)
        short = 0
        for seed in range(2000):
            streams = SeedStreams(seed)
            prep, states = alice_prepare_batch(cfg, streams)
            bob = transmit_and_measure(states, cfg, streams)
            keep = prep.bases == bob.bases
            x = int(np.sum(keep & (prep.bases == Basis.X)))
            short += int(keep.sum()) - 2 * x < cfg.n
        assert short == 0


class TestSelection:
    def test_counts(self, rng):
        sifted = fake_sifted([1] * 5 + [0] * 40)
        sel = select_check_bits(sifted, 20, rng)
        assert sel.x_checks.tolist() == list(range(5))
        assert (sel.z_checks.size, sel.code.size, sel.discarded.size) == (5, 20, 15)
        parts = np.concatenate([sel.x_checks, sel.z_checks, sel.code, sel.discarded])
        assert sorted(parts.tolist()) == list(range(45))

    def test_no_x_survivors(self, rng):
        with pytest.raises(ImbalancedSift):
            select_check_bits(fake_sifted([0] * 50), 10, rng)

    def test_z_shortfall(self, rng):
        with pytest.raises(ImbalancedSift):
            select_check_bits(fake_sifted([1] * 10 + [0] * 25), 20, rng)

    def test_announced_as_original_positions(self, rng):
        sifted = fake_sifted([1, 0, 0, 0, 0])
        sifted = SiftedData(np.array([3, 8, 9, 12, 20]), sifted.alice_bits, sifted.bob_bits, sifted.bases)
        t = SessionTranscript()
        sel = select_check_bits(sifted, 2, rng, t)
        d = t.records[0].data
        assert d["z_checks"] == sifted.positions[sel.z_checks].tolist()
        assert d["discarded"] == sifted.positions[sel.discarded].tolist()

    def test_code_set_uniform(self):
        # each Z-basis position lands in the code set with probability 1/2
        rng = np.random.default_rng(8)
        sifted = fake_sifted([1] * 10 + [0] * 40)
        trials, n_z, n = 20_000, 40, 20
        counts = np.zeros(50)
        for _ in range(trials):
            counts[select_check_bits(sifted, n, rng).code] += 1
        counts = counts[10:]
        p = n / n_z
        chi2 = np.sum((counts - trials * p) ** 2) / (trials * p * (1 - p)) * (n_z - 1) / n_z
        assert stats.chi2.sf(chi2, n_z - 1) > 1e-3


class TestEstimate:
    def test_noiseless(self):
        res = run_session(ProtocolConfig(n=500, seed=3))
        assert res.stats.estimate.eps_b_hat == 0.0 and res.stats.estimate.eps_p_hat == 0.0

    def test_marginals(self):
        res = run_session(ProtocolConfig(n=20_000, channel=ChannelParams(0.03, 0.05, 0.0), seed=4))
        est = res.stats.estimate
        assert abs(est.eps_b_hat - 0.03) <= 3 * binomial_sigma(0.03, est.n_bit_checks)
        assert abs(est.eps_p_hat - 0.05) <= 3 * binomial_sigma(0.05, est.n_phase_checks)
        assert est.n_bit_checks == est.n_phase_checks == res.stats.n_x_checks

    def test_reveal_order(self):
        a = BitVec.from_str("0110")
        b = BitVec.from_str("0011")
        sifted = SiftedData(np.arange(4), a, b, np.array([1, 0, 1, 0], dtype=np.uint8))
        from sbb84.session import CheckSelection

        sel = CheckSelection(np.array([0, 2]), np.array([1, 3]), np.array([], dtype=int), np.array([], dtype=int))
        t = SessionTranscript()
        est = estimate_errors(sifted, sel, t)
        assert (est.phase_errors, est.bit_errors) == (0, 2)
        assert str(BitVec.from_json(t.records[0].data["values"])) == "0110"

    def test_threshold_tie_proceeds(self):
        cfg = ProtocolConfig(abort_threshold_bit=0.1, abort_threshold_phase=0.1)
        assert abort_decision(CheckEstimate(0.1, 0.1, 10, 10, 1, 1), cfg) is None
        assert abort_decision(CheckEstimate(0.11, 0.0, 100, 100, 11, 0), cfg) is not None
        assert abort_decision(CheckEstimate(0.0, 0.2, 10, 10, 0, 2), cfg) is not None


class TestRunSession:
    def test_noiseless_success(self):
        res = run_session(ProtocolConfig(n=1000, seed=1))
        assert res.ok and res.keys_match
        assert res.stats.rejected == 0 and res.stats.key_len == res.key_a.nbits > 0
        assert res.stats.q == 5 and res.stats.k == 5 * 80

    def test_noisy_success(self):
        res = run_session(ProtocolConfig(n=2000, channel=ChannelParams(0.03, 0.03, 0.0), seed=2))
        assert res.ok and res.keys_match
        assert res.stats.rounds[0].disagreements > 0
        assert res.stats.leaked_parity_bits == sum(r.pairs for r in res.stats.rounds) + res.stats.verify_parities
        assert res.stats.verify_parities <= res.stats.q * 20

    @pytest.mark.parametrize("channel", [ChannelParams(), ChannelParams(0.03, 0.03, 0.0)])
    def test_replay(self, channel):
        res = run_session(ProtocolConfig(n=1000, channel=channel, seed=5))
        assert res.ok
        assert replay_key(res.transcript, res.alice_raw) == res.key_a
        assert replay_key(res.transcript, res.bob_raw) == res.key_b

    def test_same_seed_same_transcript(self):
        cfg = ProtocolConfig(n=800, channel=ChannelParams(0.02, 0.02, 0.0), seed=77)
        a, b = run_session(cfg), run_session(cfg)
        assert a.transcript.to_jsonl() == b.transcript.to_jsonl()
        assert a.key_a == b.key_a

    def test_zero_attack_same_as_no_eve(self):
        base = ProtocolConfig(n=600, channel=ChannelParams(0.01, 0.01, 0.0), seed=3)
        a = run_session(base)
        b = run_session(ProtocolConfig(n=600, channel=ChannelParams(0.01, 0.01, 0.0), eve=InterceptResend(0.0), seed=3))
        assert a.transcript.to_jsonl() == b.transcript.to_jsonl()

    def test_eve_aborts(self):
        res = run_session(ProtocolConfig(n=1000, eve=InterceptResend(1.0), seed=6))
        assert not res.ok and res.reason == "CheckFailure" and res.stage == "estimate"
        assert replay_key(res.transcript, res.alice_raw) is None
        last = res.transcript.records[-1]
        assert last.kind == "abort" and last.data == {"stage": "estimate", "reason": "CheckFailure"}

    def test_no_capacity_abort(self):
        res = run_session(ProtocolConfig(n=200, m=90, key_len_rule=KeyLengthRule(margin=1000), seed=1))
        assert res.reason == "NoKeyCapacity" and res.keys_match is None

    def test_code_bits_are_z_basis_and_unrevealed(self):
        res = run_session(ProtocolConfig(n=500, seed=12))
        recs = res.transcript.records
        a_bases, b_bases = (BitVec.from_json(r.data).to_array() for r in recs if r.kind == "bases")
        sel = next(r.data for r in recs if r.kind == "check_reveal" and r.sender == "B")
        sifted = np.flatnonzero(a_bases == b_bases)
        x_checks = sifted[a_bases[sifted] == Basis.X]
        z = sifted[a_bases[sifted] == Basis.Z]
        code = np.setdiff1d(z, np.union1d(sel["z_checks"], sel["discarded"]))
        assert code.size == 500
        assert np.all(a_bases[code] == Basis.Z)
        assert not set(code) & (set(x_checks) | set(sel["z_checks"]))
        assert len(sel["z_checks"]) == x_checks.size

    def test_transcript_shape(self):
        cfg = ProtocolConfig(n=1000, channel=ChannelParams(0.02, 0.02, 0.0), seed=8)
        res = run_session(cfg)
        seqs = [r.seq for r in res.transcript]
        assert seqs == sorted(set(seqs))
        assert len(res.transcript.of_kind("R_string")) == res.stats.q * cfg.m
        assert len(res.transcript.of_kind("pairing")) == len(res.stats.rounds)
