import numpy as np
import pytest

from ipdist.instances import (
    InstanceSpec, block_position, disjointness_bits, gen_disjointness_decip, gen_disjointness_ip,
    gen_planted, generate,
)
from ipdist.matio import format_matrix
from ipdist.refcheck import exact_matrix_distance


def test_planted_zero_is_copy():
    A, B, D = gen_planted(InstanceSpec("planted_random", 8, 0, seed=1))
    assert D == 0 and A.equals(B)


def test_planted_symmetric_small():
    A, B, D = gen_planted(InstanceSpec("planted_symmetric", 4, 3, seed=2))
    assert D == 3 == exact_matrix_distance(A, B)
    assert A.symmetric and B.symmetric


def test_planted_full():
    n = 6
    for kind in ("planted_random", "planted_symmetric"):
        A, B, D = gen_planted(InstanceSpec(kind, n, n * n, seed=3))
        assert D == n * n and (A.entries != B.entries).all()


def test_planted_real_mode():
    A, B, D = gen_planted(InstanceSpec("planted_random", 8, 5, seed=4, real=True))
    diff = B.entries - A.entries
    assert A.real and D == 5 and np.isclose(diff[diff != 0], 1.5).all()


def test_spec_validation():
    with pytest.raises(ValueError):
        InstanceSpec("planted_random", 4, 17)
    with pytest.raises(ValueError):
        InstanceSpec("disjointness_ip", 8, 8)
    with pytest.raises(ValueError):
        InstanceSpec("disjointness_ip", 10, 16)
    with pytest.raises(ValueError):
        InstanceSpec("disjointness_ip", 8, 4, x=(1, 1, 0, 0), y=(1, 1, 0, 0))
    with pytest.raises(ValueError):
        InstanceSpec("nonsense", 8, 4)


def test_ip_disjoint_and_single():
    A, B, D = gen_disjointness_ip(InstanceSpec("disjointness_ip", 16, 16, x=(1, 0, 1, 0), y=(0, 1, 0, 1)))
    assert D == 0 and exact_matrix_distance(A, B) == 0 and not B.entries.any()
    A, B, D = gen_disjointness_ip(InstanceSpec("disjointness_ip", 16, 16, x=(0, 0, 1, 0), y=(0, 1, 1, 1)))
    assert D == 16 == exact_matrix_distance(A, B)
    assert B.entries[8:12, 8:12].all() and B.symmetric


def test_ip_all_blocks_on_without_promise():
    spec = InstanceSpec("disjointness_ip", 12, 16, x=(1, 1, 1), y=(1, 1, 1), promise=False)
    A, B, D = gen_disjointness_ip(spec)
    assert D == 3 * 16 == exact_matrix_distance(A, B)


def test_decip_examples():
    A, B, D = gen_disjointness_decip(InstanceSpec("disjointness_decip", 8, 4))
    assert D == 0 and exact_matrix_distance(A, B) == 0
    x = tuple(1 if k == 5 else 0 for k in range(16))
    A, B, D = gen_disjointness_decip(InstanceSpec("disjointness_decip", 8, 4, x=x, y=x))
    assert D == 4 == exact_matrix_distance(A, B)
    assert not B.entries[2:4, 2:4].any()
    assert block_position(0, 8, 2) == (0, 0)
    assert block_position(5, 8, 2) == (1, 1)


def test_disjointness_bits():
    gen = np.random.default_rng(0)
    for inter in (0, 1, 3):
        x, y = disjointness_bits(10, inter, gen)
        assert sum(a & b for a, b in zip(x, y)) == inter


def test_reported_distance_matches_brute_force_exhaustively():
    gen = np.random.default_rng(1)
    for n in (1, 2, 4, 8, 16, 32, 64):
        for D in sorted({0, 1, n, n * n // 3, n * n}):
            for kind in ("planted_random", "planted_symmetric"):
                A, B, d = generate(InstanceSpec(kind, n, D, seed=int(gen.integers(1 << 30))))
                assert d == exact_matrix_distance(A, B)
                if kind == "planted_symmetric":
                    assert A.symmetric and B.symmetric
        for side in (s for s in (1, 2, 4, 8) if n % s == 0):
            for kind in ("disjointness_ip", "disjointness_decip"):
                probe = InstanceSpec(kind, n, side * side)
                x, y = disjointness_bits(probe.block_count, min(1, probe.block_count), gen)
                A, B, d = generate(InstanceSpec(kind, n, side * side, x=x, y=y))
                assert d == exact_matrix_distance(A, B)
                if kind == "disjointness_ip":
                    assert B.symmetric


def test_determinism_byte_for_byte():
    spec = InstanceSpec("planted_symmetric", 32, 100, seed=99)
    first = [format_matrix(M) for M in generate(spec)[:2]]
    second = [format_matrix(M) for M in generate(spec)[:2]]
    assert first == second
