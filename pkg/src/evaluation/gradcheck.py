#!/usr/bin/env python3
"""
CROLAB Gradient Check
Differenze finite centrali e batteria di controlli numerici: derivate dei kernel,
gradienti delle loss, modello end-to-end, identita' con le loss di riferimento,
calcolo della pesatura, riduzione dello stimatore e proprieta' di mining.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import quad

from src.core.kernels import Kernel, KernelKind, deriv, eval_kernel
from src.core.losses import LossFamily, build_loss_spec, compute_loss
from src.core.ranking import GapBatch, GapVector, UNIT_STEP, batch_rank_smooth, rank_exact, rank_smooth
from src.core.weighting import make_weighting
from src.data.behavior import TrainingSample
from src.model.two_tower import TwoTowerModel
from src.system.errors import EvaluationError
from src.system.logger import get_logger

logger = get_logger()

GRAD_TOLERANCE = 1e-4
FD_STEP = 1e-5
REL_FLOOR = 1e-6
IDENTITY_CATALOG = 1000
ULP_TOLERANCE = 4

DerivFn = Callable[[Kernel, np.ndarray], np.ndarray]


@dataclass
class FiniteDiffResult:
    max_rel_error: float
    index: int
    numeric: float
    analytic: float


@dataclass
class CheckResult:
    name: str
    passed: bool
    error: float = 0.0
    detail: str = ""


def finite_diff_check(f: Callable[[np.ndarray], float], point: np.ndarray, analytic_grad: np.ndarray,
                      h: float = FD_STEP, floor: float = REL_FLOOR,
                      coords: Optional[np.ndarray] = None) -> FiniteDiffResult:
    """
    Confronta il gradiente analitico con le differenze centrali coordinata per coordinata.

    L'errore relativo e' |a - n| / max(|a|, |n|, floor * max(1, |f(point)|)): il
    pavimento segue la scala di f, sotto la quale l'arrotondamento domina.

    Raises:
        EvaluationError: h non positivo o valutazioni non finite
    """
    if not h > 0:
        raise EvaluationError(f"Passo h deve essere positivo, ricevuto {h}")
    point = np.asarray(point, dtype=np.float64).reshape(-1)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64).reshape(-1)
    f0 = float(f(point))
    if not np.isfinite(f0):
        raise EvaluationError("f non finita nel punto di partenza")
    scale_floor = floor * max(1.0, abs(f0))

    indices = np.arange(point.size) if coords is None else np.asarray(coords)
    worst = FiniteDiffResult(0.0, -1, 0.0, 0.0)
    for i in indices:
        plus, minus = point.copy(), point.copy()
        plus[i] += h
        minus[i] -= h
        f_plus, f_minus = float(f(plus)), float(f(minus))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise EvaluationError(f"f non finita perturbando la coordinata {i}")
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = analytic_grad[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), scale_floor)
        if err > worst.max_rel_error or worst.index < 0:
            worst = FiniteDiffResult(err, int(i), numeric, float(a))
    return worst


# ----------------------------------------------------------------------
# Istanze casuali
# ----------------------------------------------------------------------
def _random_batch(rng: np.random.Generator, positives: int = 4, negatives: int = 6,
                  low: float = -4.0, high: float = 4.0, max_scale: float = 3.0,
                  kinks: tuple = ()) -> GapBatch:
    """Gap uniformi, maschera con qualche buco, scale in [1, max_scale]; lontano dai punti angolosi."""
    gaps = rng.uniform(low, high, size=(positives, negatives))
    for kink in kinks:
        near = np.abs(gaps - kink) < 1e-3
        gaps[near] += 2e-3
    mask = rng.random((positives, negatives)) > 0.15
    mask[:, 0] = True
    scales = rng.uniform(1.0, max_scale, size=positives)
    return GapBatch(gaps, mask, scales)


def _with_gaps(batch: GapBatch, flat: np.ndarray) -> GapBatch:
    return GapBatch(flat.reshape(batch.gaps.shape), batch.mask, batch.scales)


# ----------------------------------------------------------------------
# Controlli
# ----------------------------------------------------------------------
def check_kernels(rng: np.random.Generator, points: int = 200, deriv_fn: DerivFn = deriv) -> List[CheckResult]:
    """Derivate dei kernel differenziabili contro le differenze centrali."""
    results = []
    for kind in KernelKind:
        if kind is KernelKind.UNIT_STEP:
            continue
        kernel = Kernel(kind)
        xs = rng.uniform(-10.0, 10.0, size=points)
        if kind is KernelKind.HINGE:
            xs[np.abs(xs + kernel.margin) < 1e-3] += 2e-3
        worst = 0.0
        for x in xs:
            res = finite_diff_check(lambda p: eval_kernel(kernel, p[0]), np.array([x]),
                                    np.array([deriv_fn(kernel, x)]))
            worst = max(worst, res.max_rel_error)
        results.append(CheckResult(f"kernel:{kernel}", worst < GRAD_TOLERANCE, worst))
    return results


def _loss_specs(catalog_size: int):
    specs = []
    for kernel in ("hinge", "sigmoid", "exponential", "softplus"):
        for alpha in (0.0, 0.6, 1.0, 1.4):
            specs.append(build_loss_spec("croloss", catalog_size, alpha, kernel=kernel, clamp_rank=False))
    specs.append(build_loss_spec("croloss", catalog_size, 1.2, kernel="sigmoid", clamp_rank=True))
    for k1 in ("unit_step", "sigmoid"):
        for k2 in ("hinge", "exponential", "softplus"):
            specs.append(build_loss_spec("croloss_lambda", catalog_size, 1.0, kernel1=k1, kernel2=k2,
                                         clamp_rank=False))
    for family in ("softmax", "triplet", "bpr"):
        specs.append(build_loss_spec(family, catalog_size, 0.0))
    return specs


def _frozen_lambda_value(spec, batch: GapBatch) -> Callable[[np.ndarray], float]:
    """Valore Lambda con lambda congelato nel punto di partenza."""
    ranks1 = batch_rank_smooth(batch, spec.kernel1)
    lam = spec.weighting.density(ranks1, clamp=spec.clamp_rank)
    return lambda flat: float(np.sum(lam * batch_rank_smooth(_with_gaps(batch, flat), spec.kernel2)))


def check_losses(rng: np.random.Generator, points: int = 100, catalog_size: int = 10000) -> List[CheckResult]:
    """Gradienti rispetto ai gap di ogni famiglia di loss."""
    results = []
    for spec in _loss_specs(catalog_size):
        kinks = (-spec.margin,) if spec.family is LossFamily.TRIPLET else ()
        if spec.kernel is not None and spec.kernel.kind is KernelKind.HINGE:
            kinks = (-spec.kernel.margin,)
        if spec.kernel2 is not None and spec.kernel2.kind is KernelKind.HINGE:
            kinks = (-spec.kernel2.margin,)
        worst = 0.0
        for _ in range(points):
            batch = _random_batch(rng, kinks=kinks)
            out = compute_loss(spec, batch)
            if spec.family is LossFamily.CROLOSS_LAMBDA:
                f = _frozen_lambda_value(spec, batch)
            else:
                f = lambda flat, b=batch: compute_loss(spec, _with_gaps(b, flat)).value
            res = finite_diff_check(f, batch.gaps.ravel(), out.grad_neg.ravel())
            worst = max(worst, res.max_rel_error)
            # il positivo riceve meno la somma dei negativi
            if not np.allclose(out.grad_pos, -out.grad_neg.sum(axis=1), rtol=1e-12, atol=0.0):
                worst = max(worst, 1.0)
        clamp = "" if spec.clamp_rank or spec.family not in (LossFamily.CROLOSS, LossFamily.CROLOSS_LAMBDA) else ",continua"
        alpha = f",alpha={spec.weighting.alpha:g}" if spec.family in (LossFamily.CROLOSS, LossFamily.CROLOSS_LAMBDA) else ""
        results.append(CheckResult(f"loss:{spec.label}{alpha}{clamp}", worst < GRAD_TOLERANCE, worst))
    return results


def _tiny_model(rng: np.random.Generator, catalog_size: int = 30, dim: int = 4) -> TwoTowerModel:
    model = TwoTowerModel(catalog_size, dim, dim, dim, tau=2.0, seed=int(rng.integers(1 << 31)))
    # parametri di scala unitaria: le pre-attivazioni restano lontane dallo zero della ReLU
    for name, value in model.params.items():
        model.params[name] = rng.normal(0.0, 1.0, size=value.shape)
    return model


def _relu_margin(model: TwoTowerModel, histories, item_ids) -> float:
    _, user_cache = model.user_forward_batch(histories)
    _, item_cache = model.item_forward_batch(item_ids)
    return float(min(np.min(np.abs(user_cache.hidden_pre)), np.min(np.abs(item_cache.hidden_pre))))


def check_end_to_end(rng: np.random.Generator, points: int = 100, coords_per_point: int = 40,
                     catalog_size: int = 30, dim: int = 4) -> List[CheckResult]:
    """Gradiente dei parametri del modello a due torri attraverso forward_batch e backward."""
    families = [
        build_loss_spec("croloss", catalog_size, 1.2, kernel="sigmoid"),
        build_loss_spec("croloss_lambda", catalog_size, 1.0, kernel1="sigmoid", kernel2="softplus",
                        clamp_rank=False),
        build_loss_spec("softmax", catalog_size, 0.0),
        build_loss_spec("bpr", catalog_size, 0.0),
    ]
    results = []
    for spec in families:
        worst = 0.0
        done = 0
        while done < points:
            model = _tiny_model(rng, catalog_size, dim)
            histories = [rng.integers(0, catalog_size, size=int(rng.integers(1, 6))) for _ in range(3)]
            targets = rng.integers(0, catalog_size, size=3)
            negatives = rng.integers(0, catalog_size, size=5)
            if _relu_margin(model, histories, np.concatenate([targets, negatives])) < 1e-3:
                continue
            fwd = model.forward_batch(histories, targets, negatives)
            out = compute_loss(spec, fwd.gaps)
            grads = model.backward(fwd, out.grad_pos, out.grad_neg)

            if spec.family is LossFamily.CROLOSS_LAMBDA:
                lam = spec.weighting.density(batch_rank_smooth(fwd.gaps, spec.kernel1), clamp=False)
                value = lambda g: float(np.sum(lam * batch_rank_smooth(g, spec.kernel2)))
            else:
                value = lambda g: compute_loss(spec, g).value

            shifted = model.copy()

            def f(theta):
                shifted.load_flat(theta)
                return value(shifted.forward_batch(histories, targets, negatives).gaps)

            theta = model.flatten_params()
            coords = rng.choice(theta.size, size=min(coords_per_point, theta.size), replace=False)
            res = finite_diff_check(f, theta, grads.flatten(), coords=coords)
            worst = max(worst, res.max_rel_error)
            done += 1
        results.append(CheckResult(f"modello:{spec.label}", worst < GRAD_TOLERANCE, worst))
    return results


def check_identities(rng: np.random.Generator, instances: int = 200, catalog_size: int = IDENTITY_CATALOG,
                     margin: float = 5.0) -> List[CheckResult]:
    """
    Casi speciali con scale 1 e rank non limitato:
    exponential/alpha=1 * ln(|I|+1) = softmax; hinge/alpha=0 * |I| = triplet;
    softplus/alpha=0 * |I| = BPR (gradienti e valori).

    Il gradiente triplet deve coincidere bit per bit, quello BPR entro ULP_TOLERANCE ulp
    (expit(g) / |I| * |I| non sempre ricostruisce expit(g)); i valori sommano in ordine
    diverso e restano entro 1e-10.
    """
    exp1 = build_loss_spec("croloss", catalog_size, 1.0, kernel="exponential", clamp_rank=False)
    hinge0 = build_loss_spec("croloss", catalog_size, 0.0, kernel="hinge", margin=margin, clamp_rank=False)
    soft0 = build_loss_spec("croloss", catalog_size, 0.0, kernel="softplus", clamp_rank=False)
    softmax = build_loss_spec("softmax", catalog_size, 0.0)
    triplet = build_loss_spec("triplet", catalog_size, 0.0, margin=margin)
    bpr = build_loss_spec("bpr", catalog_size, 0.0)

    pairs = (
        ("identita:softmax", exp1, softmax, float(np.log(catalog_size + 1.0)), 1e-10),
        ("identita:triplet", hinge0, triplet, float(catalog_size), 0.0),
        ("identita:bpr", soft0, bpr, float(catalog_size), ULP_TOLERANCE * np.finfo(np.float64).eps),
    )
    value_errors = {name: 0.0 for name, *_ in pairs}
    grad_errors = {name: 0.0 for name, *_ in pairs}
    for _ in range(instances):
        pos = rng.uniform(-10.0, 10.0, size=8)
        neg = rng.uniform(-10.0, 10.0, size=(8, 20))
        batch = GapBatch(neg - pos[:, None], np.ones((8, 20), dtype=bool), np.ones(8))
        for name, cro, base, factor, _ in pairs:
            a, b = compute_loss(cro, batch), compute_loss(base, batch)
            value_err = abs(a.value * factor - b.value) / max(abs(b.value), 1e-300)
            grad_err = np.max(np.abs(a.grad_neg * factor - b.grad_neg) / np.maximum(np.abs(b.grad_neg), 1e-300))
            value_errors[name] = max(value_errors[name], value_err)
            grad_errors[name] = max(grad_errors[name], float(grad_err))

    results = []
    for name, _, _, _, grad_bound in pairs:
        passed = value_errors[name] < 1e-10 and grad_errors[name] <= grad_bound
        results.append(CheckResult(name, passed, max(value_errors[name], grad_errors[name]),
                                   f"gradiente {grad_errors[name]:.2e} (limite {grad_bound:.1e})"))
    return results


def check_weighting(rng: np.random.Generator, pairs: int = 50) -> List[CheckResult]:
    """W(1)=0, W(|I|+1)=1 esatti; w integra a 1; cdf(b)-cdf(a) coincide con la quadratura."""
    worst = 0.0
    exact = True
    for _ in range(pairs):
        alpha = float(rng.uniform(0.0, 2.0))
        catalog = int(np.exp(rng.uniform(np.log(5), np.log(1e5))))
        w = make_weighting(alpha, catalog)
        exact &= w.cdf(1.0) == 0.0 and w.cdf(float(w.upper)) == 1.0

        # sostituzione x = e^t: integranda liscia anche con alpha vicino a 2
        dens = lambda t: w.density(np.exp(t)) * np.exp(t)
        total, _ = quad(dens, 0.0, np.log(w.upper), limit=200, epsabs=1e-12, epsrel=1e-12)
        worst = max(worst, abs(total - 1.0))
        a, b = np.sort(rng.uniform(1.0, w.upper, size=2))
        part, _ = quad(dens, np.log(a), np.log(b), limit=200, epsabs=1e-12, epsrel=1e-12)
        worst = max(worst, abs((w.cdf(b) - w.cdf(a)) - part))
    return [
        CheckResult("pesatura:estremi", bool(exact), 0.0 if exact else 1.0),
        CheckResult("pesatura:quadratura", worst < 1e-6, worst),
    ]


def check_estimator(rng: np.random.Generator, instances: int = 200) -> List[CheckResult]:
    """Con I' = I lo stimatore e' R_phi; con gradino unitario e scale 1 e' il rank esatto."""
    worst = 0.0
    mismatches = 0
    sigmoid = Kernel(KernelKind.SIGMOID)
    for _ in range(instances):
        gaps = rng.uniform(-5.0, 5.0, size=int(rng.integers(1, 40)))
        gaps[rng.random(gaps.size) < 0.1] = 0.0
        vector = GapVector(gaps, 1.0)
        if rank_smooth(vector, UNIT_STEP) != rank_exact(vector):
            mismatches += 1
        direct = 1.0 + float(np.sum(eval_kernel(sigmoid, gaps)))
        worst = max(worst, abs(rank_smooth(vector, sigmoid) - direct))
    return [
        CheckResult("stimatore:rank_esatto", mismatches == 0, float(mismatches)),
        CheckResult("stimatore:catalogo_intero", worst == 0.0, worst),
    ]


def check_mining(rng: np.random.Generator, instances: int = 50, catalog_size: int = 10000) -> List[CheckResult]:
    """
    La direzione del gradiente di un positivo non dipende da alpha; la scala
    w_1(R_hat) fra positivi decresce strettamente con R_hat.
    """
    worst = 0.0
    for kernel in ("sigmoid", "softplus", "exponential"):
        flat = build_loss_spec("croloss", catalog_size, 0.0, kernel=kernel)
        top = build_loss_spec("croloss", catalog_size, 1.0, kernel=kernel)
        for _ in range(instances):
            batch = _random_batch(rng, positives=1, negatives=12, low=-3.0, high=3.0, max_scale=1.0)
            g0 = compute_loss(flat, batch).grad_neg_for(0)
            g1 = compute_loss(top, batch).grad_neg_for(0)
            r0, r1 = g0 / g0[0], g1 / g1[0]
            worst = max(worst, float(np.max(np.abs(r0 - r1) / np.abs(r0))))
    ranks = np.linspace(1.0, catalog_size, 500)
    lam = make_weighting(1.0, catalog_size).density(ranks)
    decreasing = bool(np.all(np.diff(lam) < 0))
    return [
        CheckResult("mining:direzione", worst < 1e-12, worst),
        CheckResult("mining:scala_decrescente", decreasing, 0.0 if decreasing else 1.0),
    ]


def check_recall_forms(rng: np.random.Generator, matrices: int = 100) -> List[CheckResult]:
    """Forma a indicatori e forma Top_N coincidono, anche con tutti gli score pari."""
    from src.evaluation.recall import ranks_from_scores, recall_from_ranks, recall_topn_membership

    ns = (1, 5, 10, 50, 100, 200)
    mismatches = 0
    for _ in range(matrices):
        scores = rng.permutation(200 * 50).reshape(50, 200).astype(np.float64)
        positives = rng.integers(0, 200, size=50)
        if recall_from_ranks(ranks_from_scores(scores, positives), ns) != recall_topn_membership(scores, positives, ns):
            mismatches += 1
    tied = np.zeros((10, 200))
    positives = rng.integers(0, 200, size=10)
    if recall_from_ranks(ranks_from_scores(tied, positives), ns) != recall_topn_membership(tied, positives, ns):
        mismatches += 1
    return [CheckResult("recall:forme_duali", mismatches == 0, float(mismatches))]


def run_battery(quick: bool = False, seed: int = 0, deriv_fn: DerivFn = deriv) -> List[CheckResult]:
    """
    Esegue tutti i controlli. quick riduce il numero di punti mantenendo ogni controllo.
    deriv_fn sostituisce la derivata dei kernel (per verificare che il rilevatore scatti).
    """
    rng = np.random.default_rng(seed)
    n = (lambda full, small: small) if quick else (lambda full, small: full)
    results: List[CheckResult] = []
    results += check_kernels(rng, n(200, 40), deriv_fn)
    results += check_losses(rng, n(100, 5))
    results += check_end_to_end(rng, n(100, 2), n(40, 20))
    results += check_identities(rng, n(200, 20))
    results += check_weighting(rng, n(50, 10))
    results += check_estimator(rng, n(200, 50))
    results += check_mining(rng, n(50, 10))
    results += check_recall_forms(rng, n(100, 10))
    for r in results:
        logger.debug(f"{r.name}: {'OK' if r.passed else 'FALLITO'} (errore {r.error:.3g})")
    return results
