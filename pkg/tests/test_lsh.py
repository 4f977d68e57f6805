import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tardos_nns.attack import forge, interleaving
from tardos_nns.codegen import ArcsineTruncated, generate_codebook, nuida_c3, sample_bias
from tardos_nns.core import (CapacityError, Codebook, DomainError, FormatError,
                             IntegrityError, accumulate_score)
from tardos_nns.decoder import Threshold, TopM, embed_codeword, embed_pirate, linear_decode
from tardos_nns.lsh import (LshParams, SparseHyperplane, build_index, candidate_users,
                            collision_probability, decode_lsh, hash_key, load_index,
                            probe_sequence, query, sample_planes, save_index)


def instance(n=400, length=300, seed=0, dist=None):
    bias = sample_bias(dist or nuida_c3(), length, seed=seed)
    book = generate_codebook(n, bias, seed=seed)
    col = np.random.default_rng(seed).choice(n, 3, replace=False)
    y = forge(book, col, interleaving(3), seed=seed)
    return bias, book, col, y


class TestParams:
    @pytest.mark.parametrize("kw", [dict(t=0), dict(k=0), dict(k=64), dict(sparsity=0.0),
                                    dict(k=3, probes=9), dict(probes=0)])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            LshParams(**kw)


class TestPlanes:
    def test_sparsity(self):
        planes = sample_planes(3000, LshParams(t=2, k=5), seed=1)
        assert planes.shape == (2, 5, 3000)
        assert np.mean(planes != 0) == pytest.approx(1 / 3, abs=0.01)
        assert np.mean(planes == 1) == pytest.approx(np.mean(planes == -1), abs=0.01)

    def test_sparse_hyperplane(self):
        h = SparseHyperplane.from_dense(np.array([0, 1, 0, -1]))
        np.testing.assert_array_equal(h.positions, [1, 3])
        assert h.dot(np.array([5.0, 2.0, 7.0, 1.0])) == 1.0
        with pytest.raises(DomainError):
            SparseHyperplane(np.array([2, 1]), np.array([1, 1]), 4)
        with pytest.raises(DomainError):
            SparseHyperplane(np.array([4]), np.array([1]), 4)


class TestHashKey:
    def test_all_positive(self):
        planes = np.eye(4, dtype=np.int8)
        assert hash_key(np.ones(4), planes) == 0b1111

    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
    @settings(max_examples=30)
    def test_complement_and_scale(self, seed, lam):
        g = np.random.default_rng(seed)
        v = g.standard_normal(64)
        planes = sample_planes(64, LshParams(t=1, k=10, sparsity=1.0), seed)[0]
        key = hash_key(v, planes)
        assert hash_key(lam * v, planes) == key
        if np.all(planes @ v != 0):
            assert hash_key(-v, planes) == key ^ (2**10 - 1)

    def test_collision_law_per_plane(self):
        # dense +-1 planes, pairs at fixed angle
        g = np.random.default_rng(3)
        length = 1024
        r = sample_planes(length, LshParams(t=40, k=50, sparsity=1.0), 5)
        r = r.reshape(-1, length).astype(float)
        u = g.standard_normal(length)
        u /= np.linalg.norm(u)
        w = g.standard_normal(length)
        w -= (w @ u) * u
        w /= np.linalg.norm(w)
        phi = math.pi / 3
        v = math.cos(phi) * u + math.sin(phi) * w
        same = np.mean((r @ u >= 0) == (r @ v >= 0))
        assert same == pytest.approx(1 - phi / math.pi, abs=0.02)


class TestIndex:
    def test_single_user(self):
        book = Codebook.from_bits([[1, 0, 1, 1]])
        idx = build_index(book, LshParams(t=3, k=4), seed=0)
        for table in range(3):
            assert idx.bucket_sizes(table).tolist() == [1]

    def test_identical_codewords_share_keys(self):
        row = np.random.default_rng(0).integers(0, 2, 100)
        book = Codebook.from_bits(np.stack([row, row, 1 - row]))
        idx = build_index(book, LshParams(t=5, k=8), seed=2)
        for table in range(5):
            key = hash_key(embed_codeword(row), idx.planes(table))
            assert set(idx.bucket(table, key).tolist()) >= {0, 1}

    def test_each_user_once_per_table(self):
        _, book, _, _ = instance()
        idx = build_index(book, LshParams(t=4, k=6), seed=1)
        for table in range(4):
            assert idx.bucket_sizes(table).sum() == book.n
            np.testing.assert_array_equal(np.sort(idx.members[table]), np.arange(book.n))

    def test_keys_match_scalar_hash(self):
        bias, book, _, _ = instance(n=50)
        idx = build_index(book, LshParams(t=3, k=7), seed=3)
        for j in range(book.n):
            v = embed_codeword(book.row(j))
            for table in range(3):
                assert j in idx.bucket(table, hash_key(v, idx.planes(table)))

    def test_split_fraction_k1(self):
        bits = np.random.default_rng(4).integers(0, 2, (10_000, 200))
        idx = build_index(Codebook.from_bits(bits), LshParams(t=1, k=1, sparsity=1.0), seed=4)
        sizes = idx.bucket_sizes(0)
        assert sizes.max() / 10_000 == pytest.approx(0.5, abs=0.05)

    def test_deterministic(self):
        _, book, _, _ = instance()
        a = build_index(book, LshParams(t=3, k=6), seed=9)
        b = build_index(book, LshParams(t=3, k=6), seed=9)
        np.testing.assert_array_equal(a.planes_dense, b.planes_dense)
        for table in range(3):
            np.testing.assert_array_equal(a.members[table], b.members[table])

    def test_capacity(self):
        _, book, _, _ = instance()
        with pytest.raises(CapacityError):
            build_index(book, LshParams(t=100, k=4), seed=0, memory_budget=1000)


class TestProbes:
    def test_single_flips_in_magnitude_order(self):
        dots = np.array([3.0, -0.5, 1.0, -2.0])
        base = 0b0101
        assert probe_sequence(dots, 5) == [base, base ^ 2, base ^ 4, base ^ 8, base ^ 1]

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_full_sequence_covers_all_keys(self, k):
        dots = np.random.default_rng(k).standard_normal(k)
        seq = probe_sequence(dots, 2**k)
        assert sorted(seq) == list(range(2**k))

    def test_costs_non_decreasing(self):
        dots = np.random.default_rng(0).standard_normal(6)
        seq = probe_sequence(dots, 64)
        base = seq[0]
        cost = [sum(abs(dots[b]) for b in range(6) if (s ^ base) >> b & 1) for s in seq]
        singles = cost[1:7]
        assert singles == sorted(singles)
        assert cost[7:] == sorted(cost[7:])

    def test_candidate_monotonicity(self):
        bias, book, _, y = instance()
        idx = build_index(book, LshParams(t=4, k=6), seed=0)
        q = embed_pirate(y, bias)
        prev = set()
        for probes in (1, 2, 5, 7, 20, 64):
            cur = set(candidate_users(idx, q, probes).tolist())
            assert prev <= cur
            prev = cur
        assert prev == set(range(book.n))


class TestQuery:
    def test_self_query(self):
        bias, book, _, _ = instance()
        idx = build_index(book, LshParams(t=6, k=10), seed=0)
        res = query(idx, embed_codeword(book.row(17)), book, bias)
        assert 17 in res.users
        assert res.users[0] == 17

    def test_work_accounting(self):
        bias, book, _, y = instance()
        params = LshParams(t=6, k=6)
        idx = build_index(book, params, seed=0)
        res = query(idx, embed_pirate(y, bias), book, bias)
        assert res.work.scores_computed == res.users.size == np.unique(res.users).size
        assert res.work.hash_dot_products == 36
        assert res.work.dot_products_total == 36 + res.users.size
        assert res.work.scores_computed <= book.n

    def test_exact_scores(self):
        bias, book, _, y = instance(dist=ArcsineTruncated(0.02))
        res = query(build_index(book, LshParams(t=6, k=6), 0), embed_pirate(y, bias), book, bias)
        for u, s in zip(res.users[:10], res.scores[:10]):
            assert s == pytest.approx(accumulate_score(book.row(u), y, bias), rel=1e-12)

    def test_integrity(self):
        bias, book, _, y = instance()
        idx = build_index(book, LshParams(t=2, k=4), seed=0)
        _, other, _, _ = instance(seed=1)
        with pytest.raises(IntegrityError):
            query(idx, embed_pirate(y, bias), other, bias)


class TestDecodeLsh:
    def test_infinite_threshold(self):
        bias, book, _, y = instance()
        res = decode_lsh(book, y, bias, LshParams(t=3, k=5), mode=Threshold(math.inf))
        assert res.accused == ()
        assert res.work.dot_products_total > 0

    def test_c1(self):
        bias, book, _, _ = instance()
        res = decode_lsh(book, book.row(5), bias, LshParams(t=2, k=12), mode=TopM(1))
        assert res.accused_users == [5]

    def test_degenerate_matches_linear(self):
        bias, book, _, y = instance()
        params = LshParams(t=2, k=5, probes=32)
        a = decode_lsh(book, y, bias, params, mode=TopM(20))
        b = linear_decode(book, y, bias, mode=TopM(20))
        assert a.accused == b.accused

    def test_index_param_mismatch(self):
        bias, book, _, y = instance()
        idx = build_index(book, LshParams(t=2, k=5), seed=0)
        with pytest.raises(DomainError):
            decode_lsh(book, y, bias, LshParams(t=3, k=5), index=idx)

    def test_collision_formula_vs_simulation(self):
        # synthetic pairs at a fixed angle, fresh dense planes per repetition
        d, k, t, reps, length = 0.5, 4, 3, 1500, 256
        g = np.random.default_rng(11)
        u = g.standard_normal(length)
        u /= np.linalg.norm(u)
        w = g.standard_normal(length)
        w -= (w @ u) * u
        w /= np.linalg.norm(w)
        v = d * u + math.sqrt(1 - d * d) * w
        hits = 0
        for rep in range(reps):
            planes = sample_planes(length, LshParams(t=t, k=k, sparsity=1.0), rep)
            hits += any(hash_key(u, planes[i]) == hash_key(v, planes[i]) for i in range(t))
        assert hits / reps == pytest.approx(collision_probability(d, k, t), abs=0.03)

    def test_collision_formula_examples(self):
        assert collision_probability(1.0, 16, 100) == 1.0
        assert collision_probability(0.0, 1, 1) == pytest.approx(0.5)
        assert collision_probability(0.0, 2, 2) == pytest.approx(1 - 0.75**2)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        bias, book, _, y = instance()
        idx = build_index(book, LshParams(t=3, k=7, probes=4), seed=6)
        save_index(idx, tmp_path / "i.tfli")
        back = load_index(tmp_path / "i.tfli", book)
        assert back.params == idx.params
        np.testing.assert_array_equal(back.planes_dense, idx.planes_dense)
        q = embed_pirate(y, bias)
        np.testing.assert_array_equal(candidate_users(back, q), candidate_users(idx, q))

    def test_refuses_other_codebook(self, tmp_path):
        _, book, _, _ = instance()
        save_index(build_index(book, LshParams(t=2, k=4), 0), tmp_path / "i.tfli")
        _, other, _, _ = instance(seed=3)
        with pytest.raises(IntegrityError):
            load_index(tmp_path / "i.tfli", other)

    def test_corrupt(self, tmp_path):
        _, book, _, _ = instance()
        path = tmp_path / "i.tfli"
        save_index(build_index(book, LshParams(t=2, k=4), 0), path)
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        with pytest.raises(FormatError):
            load_index(path)
        path.write_bytes(b"XXXX" + data[4:])
        with pytest.raises(FormatError):
            load_index(path)
        path.write_bytes(data + b"\0")
        with pytest.raises(FormatError):
            load_index(path)

