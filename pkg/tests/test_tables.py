"""Vote-table correctness against exact references.

Expected values frozen from the exact-fraction permutation enumeration:
SV+(2,1,C=2) = 11/36, SV-(2,1,C=2) = -4/9, SV+(1,2,C=2) = 4/9,
SV+(3,2,C=2) = 137/600, SV+(2,1,C=3) = 13/36, SV+(1,1,C=5) = 13/20.
"""

import numpy as np
import pytest

from weshap.tables import (
    SVTables,
    build_tables,
    psi,
    sv_plus_direct,
    sv_plus_permutation_oracle,
)


class TestPsi:
    def test_first_voter_binary(self):
        assert psi(0, 0, 2) == 0.5

    def test_first_voter_many_classes(self):
        assert psi(0, 0, 4) == 0.75

    def test_direct_substitution(self):
        assert psi(1, 1, 2) == pytest.approx(2 / 3 - 1 / 2, abs=1e-15)
        assert psi(1, 0, 2) == 0.0

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            psi(-1, 0, 2)


class TestBuildTables:
    def test_boundary_single_voter(self):
        t = build_tables(1, 2)
        assert t.plus(1, 0) == 0.5

    def test_boundary_row(self):
        t = build_tables(12, 3)
        for p in range(1, 13):
            assert t.plus(p, 0) == (3 - 1) / (3 * p)

    def test_null_boundary(self):
        t = build_tables(6, 2)
        for w in range(7):
            assert t.plus(0, w) == 0.0

    def test_balanced_pair(self):
        assert build_tables(2, 2).plus(1, 1) == 0.5

    def test_frozen_values(self):
        t = build_tables(5, 2)
        assert t.plus(2, 1) == pytest.approx(11 / 36, abs=1e-15)
        assert t.minus(2, 1) == pytest.approx(-4 / 9, abs=1e-15)
        assert t.plus(1, 2) == pytest.approx(4 / 9, abs=1e-15)
        assert t.plus(3, 2) == pytest.approx(137 / 600, abs=1e-15)
        t3 = build_tables(3, 3)
        assert t3.plus(2, 1) == pytest.approx(13 / 36, abs=1e-15)
        t5 = build_tables(2, 5)
        assert t5.plus(1, 1) == pytest.approx(13 / 20, abs=1e-15)

    def test_minus_at_zero_wrong_is_an_error(self):
        t = build_tables(3, 2)
        with pytest.raises(ValueError):
            t.minus(2, 0)

    def test_out_of_range_access(self):
        t = build_tables(3, 2)
        with pytest.raises(IndexError):
            t.plus(3, 1)

    def test_plus_nonnegative(self):
        for C in (2, 3, 7):
            t = build_tables(30, C)
            tri = np.triu(np.ones_like(t.sv_plus, dtype=bool))[:, ::-1]
            vals = t.sv_plus[~np.isnan(t.sv_plus)]
            assert (vals >= 0).all()

    def test_data_independence(self):
        a = build_tables(10, 3).sv_plus
        b = build_tables(10, 3).sv_plus
        assert np.array_equal(a, b, equal_nan=True)


class TestAgainstReferences:
    @pytest.mark.parametrize("C", [2, 3, 5])
    def test_matches_permutation_oracle(self, C):
        t = build_tables(7, C)
        for s in range(1, 8):
            for p in range(1, s + 1):
                w = s - p
                assert t.plus(p, w) == pytest.approx(
                    sv_plus_permutation_oracle(p, w, C), abs=1e-12
                )

    @pytest.mark.parametrize("C", [2, 4])
    def test_matches_direct_formula(self, C):
        t = build_tables(25, C)
        for s in range(1, 26):
            for p in range(1, s + 1):
                assert t.plus(p, s - p) == pytest.approx(sv_plus_direct(p, s - p, C), abs=1e-9)

    def test_direct_formula_examples(self):
        assert sv_plus_direct(1, 0, 2) == pytest.approx(0.5, abs=1e-15)
        assert sv_plus_direct(2, 1, 2) == pytest.approx(11 / 36, abs=1e-12)
        assert sv_plus_direct(1, 2, 2) == pytest.approx(4 / 9, abs=1e-12)

    def test_permutation_oracle_examples(self):
        assert sv_plus_permutation_oracle(1, 0, 2) == 0.5
        assert sv_plus_permutation_oracle(1, 1, 2) == pytest.approx(0.5, abs=1e-15)
        assert sv_plus_permutation_oracle(2, 1, 2) == pytest.approx(11 / 36, abs=1e-12)

    def test_guards(self):
        with pytest.raises(ValueError):
            sv_plus_direct(30, 20, 2)
        with pytest.raises(ValueError):
            sv_plus_permutation_oracle(5, 5, 2)


class TestEfficiencyIdentity:
    @pytest.mark.parametrize("C", [2, 3, 6, 10])
    def test_identity_over_table(self, C):
        M = 60
        t = build_tables(M, C)
        for s in range(1, M + 1):
            for p in range(s + 1):
                w = s - p
                lhs = p * t.sv_plus[p, w]
                if w >= 1:
                    lhs += w * t.sv_minus[p, w]
                assert lhs == pytest.approx(p / s - 1 / C, abs=1e-12)
