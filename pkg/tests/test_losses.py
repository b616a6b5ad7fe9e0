"""Loss terms vs independent scalar-loop oracles, plus schedule contracts."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timbremap import autodiff as ad
from timbremap import losses as L

BATCHES = (2, 3, 16, 33)
REL = 1e-6


# ---------------------------------------------------------------------------
# scalar-loop oracles (no Tensor machinery, no vectorization)


def oracle_rec(e_hat, e):
    total = 0.0
    count = 0
    for idx in np.ndindex(e.shape):
        total += (e_hat[idx] - e[idx]) ** 2
        count += 1
    return total / count


def oracle_kl(mu, logvar, reduce="sum"):
    total = 0.0
    n = mu.shape[0]
    for i in range(n):
        for d in range(mu.shape[1]):
            var = math.exp(logvar[i, d])
            total += 0.5 * (mu[i, d] ** 2 + var - logvar[i, d] - 1.0)
    return total / n if reduce == "mean" else total


def oracle_reg(mu):
    total = 0.0
    for i in range(mu.shape[0]):
        norm = math.sqrt(sum(mu[i, d] ** 2 for d in range(mu.shape[1])))
        total += max(0.0, norm - 1.0)
    return total / mu.shape[0]


def oracle_neighbor(mu, ids, margin=0.25, eps=1e-6):
    n = mu.shape[0]
    att_num = att_den = rep_num = rep_den = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d2 = sum((mu[i, k] - mu[j, k]) ** 2 for k in range(mu.shape[1]))
            d = math.sqrt(d2)
            if ids[i] == ids[j]:
                att_num += d2
                att_den += 1.0
            else:
                rep_num += max(0.0, margin - d) ** 2
                rep_den += 1.0
    return att_num / (att_den + eps), rep_num / (rep_den + eps)


def oracle_cross_entropy(logits, targets):
    total = 0.0
    n, k = logits.shape
    for i in range(n):
        m = max(logits[i, j] for j in range(k))
        lse = m + math.log(sum(math.exp(logits[i, j] - m) for j in range(k)))
        total += lse - logits[i, targets[i]]
    return total / n


# ---------------------------------------------------------------------------


class TestReconstruction:
    def test_identity_is_zero(self):
        e = ad.constant(np.random.default_rng(0).normal(size=(4, 8, 6)))
        assert L.loss_rec(e, ad.constant(e.data.copy())).item() == 0.0

    def test_unit_offset_is_one(self):
        e = np.random.default_rng(1).normal(size=(3, 5, 7))
        got = L.loss_rec(ad.constant(e + 1.0), ad.constant(e)).item()
        assert got == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("n", BATCHES)
    def test_matches_oracle(self, n):
        rng = np.random.default_rng(n)
        e_hat = rng.normal(size=(n, 4, 6))
        e = rng.normal(size=(n, 4, 6))
        got = L.loss_rec(ad.constant(e_hat), ad.constant(e)).item()
        assert got == pytest.approx(oracle_rec(e_hat, e), rel=REL)


class TestKL:
    def test_standard_normal_is_zero(self):
        z = np.zeros((5, 2))
        assert L.loss_kl(ad.constant(z), ad.constant(z)).item() == pytest.approx(0.0, abs=1e-12)

    def test_single_sample_unit_mean(self):
        mu = np.array([[1.0, 0.0]])
        lv = np.zeros((1, 2))
        assert L.loss_kl(ad.constant(mu), ad.constant(lv)).item() == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("n", BATCHES)
    @pytest.mark.parametrize("reduce", ["sum", "mean"])
    def test_matches_oracle(self, n, reduce):
        rng = np.random.default_rng(10 + n)
        mu = rng.normal(size=(n, 2))
        lv = rng.normal(size=(n, 2)) * 0.5
        got = L.loss_kl(ad.constant(mu), ad.constant(lv), reduce=reduce).item()
        assert got == pytest.approx(oracle_kl(mu, lv, reduce), rel=REL)


class TestReg:
    def test_origin_is_zero(self):
        assert L.loss_reg(ad.constant(np.zeros((6, 2)))).item() == 0.0

    def test_single_row_at_two(self):
        assert L.loss_reg(ad.constant(np.array([[2.0, 0.0]]))).item() == pytest.approx(1.0)

    @pytest.mark.parametrize("n", BATCHES)
    def test_matches_oracle(self, n):
        rng = np.random.default_rng(20 + n)
        mu = rng.normal(size=(n, 2)) * 1.5
        got = L.loss_reg(ad.constant(mu)).item()
        assert got == pytest.approx(oracle_reg(mu), rel=REL)


class TestNeighbor:
    def test_identical_same_class_is_zero(self):
        mu = ad.constant(np.ones((4, 2)) * 0.3)
        att, rep = L.loss_neighbor(mu, np.zeros(4, dtype=int))
        assert att.item() == pytest.approx(0.0, abs=1e-12)
        assert rep.item() == pytest.approx(0.0, abs=1e-12)

    def test_two_classes_at_margin(self):
        mu = ad.constant(np.array([[0.0, 0.0], [0.25, 0.0]]))
        att, rep = L.loss_neighbor(mu, np.array([0, 1]))
        assert rep.item() == pytest.approx(0.0, abs=1e-12)

    def test_two_classes_coincident(self):
        # both different-class samples at one point: shortfall is the full margin
        mu = ad.constant(np.zeros((2, 2)))
        att, rep = L.loss_neighbor(mu, np.array([0, 1]))
        expected = 2 * 0.25 ** 2 / (2 + 1e-6)
        assert rep.item() == pytest.approx(expected, rel=1e-9)
        assert rep.item() == pytest.approx(0.0625, rel=1e-4)

    def test_batch_of_one_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            L.loss_neighbor(ad.constant(np.zeros((1, 2))), np.array([0]))

    @pytest.mark.parametrize("n", BATCHES)
    def test_matches_oracle(self, n):
        rng = np.random.default_rng(30 + n)
        mu = rng.normal(size=(n, 2)) * 0.4
        ids = rng.integers(0, max(2, n // 3), size=n)
        att, rep = L.loss_neighbor(ad.constant(mu), ids)
        o_att, o_rep = oracle_neighbor(mu, ids)
        assert att.item() == pytest.approx(o_att, rel=REL)
        assert rep.item() == pytest.approx(o_rep, rel=REL)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        mu = rng.normal(size=(n, 2))
        ids = rng.integers(0, 3, size=n)
        perm = rng.permutation(n)
        att1, rep1 = L.loss_neighbor(ad.constant(mu), ids)
        att2, rep2 = L.loss_neighbor(ad.constant(mu[perm]), ids[perm])
        assert att1.item() == pytest.approx(att2.item(), rel=1e-9)
        assert rep1.item() == pytest.approx(rep2.item(), rel=1e-9)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_repulsive_zero_beyond_margin(self, seed):
        # place class centers > margin apart, samples tight around them
        rng = np.random.default_rng(seed)
        centers = np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.6]])
        ids = rng.integers(0, 3, size=8)
        mu = centers[ids] + rng.normal(size=(8, 2)) * 0.01
        dmin = min(np.linalg.norm(mu[i] - mu[j])
                   for i in range(8) for j in range(8) if ids[i] != ids[j])
        _, rep = L.loss_neighbor(ad.constant(mu), ids)
        if dmin >= 0.25:
            assert rep.item() == 0.0


class TestCrossEntropy:
    def test_uniform_logits_give_log_k(self):
        for k in (2, 5, 13):
            logits = ad.constant(np.zeros((4, k)))
            got = L.loss_cross_entropy(logits, np.zeros(4, dtype=int)).item()
            assert got == pytest.approx(math.log(k), rel=1e-9)

    def test_saturated_correct_logit(self):
        logits = np.zeros((1, 5))
        logits[0, 2] = 1e9
        got = L.loss_cross_entropy(ad.constant(logits), np.array([2])).item()
        assert got == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("n", BATCHES)
    def test_matches_oracle(self, n):
        rng = np.random.default_rng(40 + n)
        logits = rng.normal(size=(n, 7)) * 3
        targets = rng.integers(0, 7, size=n)
        got = L.loss_cross_entropy(ad.constant(logits), targets).item()
        assert got == pytest.approx(oracle_cross_entropy(logits, targets), rel=REL)


class TestCurriculum:
    def test_epoch_zero_endpoint(self):
        w = L.LossWeights()
        gamma, m_nei, m_inst, m_fam = L.curriculum_gamma(0, 100, w)
        assert (gamma, m_nei, m_inst, m_fam) == (0.0, 0.0, 0.0, 1.0)

    def test_final_epoch_endpoint(self):
        w = L.LossWeights()
        gamma, m_nei, m_inst, m_fam = L.curriculum_gamma(100, 100, w)
        assert (gamma, m_nei, m_inst, m_fam) == (1.0, 1.0, 1.0, 0.0)

    def test_quarter_progress_sqrt(self):
        w = L.LossWeights()
        _, m_nei, _, _ = L.curriculum_gamma(25, 100, w)
        assert m_nei == pytest.approx(0.5, rel=1e-12)  # 0.25 ** 0.5

    def test_zero_epochs_rejected(self):
        with pytest.raises(ValueError):
            L.curriculum_gamma(0, 0, L.LossWeights())

    @given(st.integers(1, 10_000), st.floats(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_gamma_in_unit_interval(self, n_epochs, frac):
        epoch = int(frac * n_epochs)
        gamma, m_nei, m_inst, m_fam = L.curriculum_gamma(epoch, n_epochs, L.LossWeights())
        assert 0.0 <= gamma <= 1.0
        for m in (m_nei, m_inst, m_fam):
            assert 0.0 <= m <= 1.0


class TestTotal:
    @staticmethod
    def _terms(values):
        keys = ("rec", "kl", "reg", "nei_attractive", "nei_repulsive", "pitch", "inst", "fam")
        return {k: ad.constant(np.asarray(float(v))) for k, v in zip(keys, values)}

    def test_all_zero_terms(self):
        total, bd = L.total_vae_loss(self._terms([0.0] * 8), L.LossWeights(), 5, 10)
        assert total.item() == 0.0
        assert bd.check_total()

    def test_family_weight_vanishes_at_end(self):
        terms = self._terms([0, 0, 0, 0, 0, 0, 0, 1.0])
        total, _ = L.total_vae_loss(terms, L.LossWeights(), 10, 10)
        assert total.item() == 0.0

    def test_reference_weights_unit_terms_at_gamma_one(self):
        # published weight table with all terms 1 at gamma=1:
        # 0.2 + 0.0039 + 1.0 + 0.6 + 0.07 + 0.12 + 0 = 1.9939
        terms = self._terms([1, 1, 1, 0.5, 0.5, 1, 1, 1])
        total, bd = L.total_vae_loss(terms, L.LossWeights(), 10, 10)
        assert total.item() == pytest.approx(1.9939, rel=1e-9)
        assert bd.check_total()

    def test_breakdown_total_identity(self):
        rng = np.random.default_rng(3)
        terms = self._terms(rng.uniform(0, 2, size=8))
        _, bd = L.total_vae_loss(terms, L.LossWeights(), 3, 7)
        assert bd.check_total()


class TestLossGradients:
    """Every loss op must pass the finite-difference check (part of the
    gradient-fidelity gate)."""

    def test_rec_gradient(self):
        rng = np.random.default_rng(50)
        params = {"e_hat": ad.parameter(rng.normal(size=(3, 4, 5)), dtype=np.float64)}
        e = ad.constant(rng.normal(size=(3, 4, 5)))
        rep = ad.check_gradients(lambda: L.loss_rec(params["e_hat"], e), params, op="loss_rec")
        assert rep.passed, str(rep)

    def test_kl_gradient(self):
        rng = np.random.default_rng(51)
        params = {
            "mu": ad.parameter(rng.normal(size=(4, 2)), dtype=np.float64),
            "logvar": ad.parameter(rng.normal(size=(4, 2)) * 0.3, dtype=np.float64),
        }
        rep = ad.check_gradients(lambda: L.loss_kl(params["mu"], params["logvar"]),
                                 params, op="loss_kl")
        assert rep.passed, str(rep)

    def test_reg_gradient(self):
        rng = np.random.default_rng(52)
        mu = rng.normal(size=(6, 2))
        # keep rows away from the hinge at ||mu||=1 so the FD is valid
        norms = np.linalg.norm(mu, axis=1, keepdims=True)
        mu = np.where(np.abs(norms - 1.0) < 0.05, mu * 1.2, mu)
        params = {"mu": ad.parameter(mu, dtype=np.float64)}
        rep = ad.check_gradients(lambda: L.loss_reg(params["mu"]), params, op="loss_reg")
        assert rep.passed, str(rep)

    def test_neighbor_gradient(self):
        rng = np.random.default_rng(53)
        ids = np.array([0, 0, 1, 1, 2, 2])
        params = {"mu": ad.parameter(rng.normal(size=(6, 2)) * 0.4, dtype=np.float64)}

        def build():
            att, rep = L.loss_neighbor(params["mu"], ids)
            return ad.add(att, rep)

        rep = ad.check_gradients(build, params, op="loss_neighbor")
        assert rep.passed, str(rep)

    def test_cross_entropy_gradient(self):
        rng = np.random.default_rng(54)
        targets = rng.integers(0, 5, size=6)
        params = {"logits": ad.parameter(rng.normal(size=(6, 5)), dtype=np.float64)}
        rep = ad.check_gradients(lambda: L.loss_cross_entropy(params["logits"], targets),
                                 params, op="loss_cross_entropy")
        assert rep.passed, str(rep)


class TestWeightsValidation:
    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError):
            L.LossWeights(beta_kl=-0.1)

    def test_zero_margin_rejected(self):
        with pytest.raises(ValueError):
            L.LossWeights(margin=0.0)

    def test_csv_roundtrip(self, tmp_path):
        terms = TestTotal._terms([1, 2, 3, 0.5, 0.5, 4, 5, 6])
        _, bd = L.total_vae_loss(terms, L.LossWeights(), 2, 10)
        path = tmp_path / "log.csv"
        L.append_breakdown_csv(path, [bd])
        L.append_breakdown_csv(path, [bd])
        lines = path.read_text().strip().splitlines()
        assert lines[0].split(",")[0] == "epoch"
        assert len(lines) == 3
