"""Impersonation attacks: detection statistics and the one-home state."""
import numpy as np
import pytest

from faraday_qkd import impersonation_one_home, impersonation_two_homes, one_home_state

from oracles import fid, one_home_state as oracle_one_home
from oracles import one_home_state_without_phases

RNG_SEED = np.random.default_rng


class TestTwoHomes:
    def test_detection_near_half(self):
        rep = impersonation_two_homes(RNG_SEED(71), 20_000)
        assert abs(rep.detection_freq - 0.5) < 0.01

    def test_eve_shares_perfect_key_with_alice(self):
        rep = impersonation_two_homes(RNG_SEED(72), 5_000)
        assert rep.eve_alice_agreement == 1.0

    def test_alice_bob_streams_independent(self):
        rep = impersonation_two_homes(RNG_SEED(73), 20_000)
        assert abs(rep.alice_bob_correlation) < 4 / np.sqrt(rep.rounds)


class TestOneHome:
    def test_detection_near_half(self):
        rep = impersonation_one_home(RNG_SEED(81), 20_000)
        assert abs(rep.detection_freq - 0.5) < 0.011

    def test_state_matches_direct_construction(self):
        rng = np.random.default_rng(82)
        for _ in range(20):
            a, b, e = rng.uniform(0, 2 * np.pi, 3)
            got = one_home_state(a, b, e)
            assert abs(got.norm() - 1.0) < 1e-10
            assert fid(got.amplitudes, oracle_one_home(a, b, e)) >= 1 - 1e-9

    def test_branch_phases_are_essential(self):
        # dropping the conditional branch phases yields a state orthogonal to
        # the faithful one, though all detection statistics are phase-blind
        rng = np.random.default_rng(83)
        a, b, e = rng.uniform(0, 2 * np.pi, 3)
        got = one_home_state(a, b, e)
        assert fid(got.amplitudes, one_home_state_without_phases(a, b, e)) < 1e-12

    def test_eve_bits_track_branch_parity(self):
        rep = impersonation_one_home(RNG_SEED(84), 5_000)
        assert rep.eve_consistency == 1.0

    def test_eve_odd_bits_match_alice(self):
        # C and E' are both rotated by the (A, E) pair, so Eve's travel
        # outcome always mirrors Alice's
        rep = impersonation_one_home(RNG_SEED(85), 5_000)
        assert rep.eve_alice_agreement == 1.0
