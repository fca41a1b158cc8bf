"""Filler-particle prediction: dataset assembly, mixed-effects logistic
regression, concordance, and model comparison.

The estimator is a penalized-likelihood logistic fit with Gaussian random
intercepts: a joint damped Newton step over fixed effects and group
deviations, alternating with an EM-style variance update, and a Laplace
approximation to the marginal likelihood for AIC.  Numpy/scipy only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import rankdata

log = logging.getLogger(__name__)

PREDICTORS = ("nxtwS_tgt", "nxtwS_src", "nxtwS_mt",
              "AvS_tgt", "AvS_src", "AvS_mt")


class SeparationError(RuntimeError):
    def __init__(self, predictor):
        super().__init__(f"complete separation on predictor {predictor!r}")
        self.predictor = predictor


class ConvergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(f"{message}; penalized log-likelihood trace: "
                         f"{[round(v, 4) for v in trace[-8:]]}")
        self.trace = trace


@dataclass
class FPObservation:
    outcome: int  # 1 iff the word is immediately preceded by an FP
    nxtwS_tgt: float = 0.0
    nxtwS_src: float = 0.0
    nxtwS_mt: float = 0.0
    AvS_tgt: float = 0.0
    AvS_src: float = 0.0
    AvS_mt: float = 0.0
    speaker_id: str = None
    doc_id: str = None
    direction: str = None


@dataclass
class FitResult:
    coefficients: dict  # name -> estimate
    std_errors: dict
    aic: float
    c: float
    n_obs: int
    loglik: float = None
    variances: dict = field(default_factory=dict)  # factor -> sigma^2
    predictors: tuple = ()
    fitted: np.ndarray = None


def zscore(values, name):
    arr = np.asarray(values, dtype=float)
    sd = arr.std()  # population sd
    if sd == 0.0 or not np.isfinite(sd):
        raise ValueError(f"predictor {name} is constant; z-score undefined")
    return (arr - arr.mean()) / sd


def build_fp_dataset(tgt_rows, src_rows, direction: str,
                     variant: str = "base") -> list:
    """One observation per eligible target surface word.

    Eligible: not an FP, not an expansion row, has LM and MT surprisal, and
    at least one aligned source word whose LM surprisal resolves.  Outcome is
    whether the immediately preceding surface row in the segment is an FP
    (expansion rows are skipped when looking back; no cross-segment lookback).
    """
    lm_col = f"srp_{variant}_gpt2"
    mt_col = f"srp_{variant}_mt"
    src_by_id = {str(r.word_id): r for r in src_rows}

    src_seg_means = {}
    for r in src_rows:
        if r.is_fp or r.is_expansion:
            continue
        v = getattr(r, lm_col)
        if v is not None:
            src_seg_means.setdefault((r.doc_id, r.seg_id), []).append(v)
    src_seg_means = {k: float(np.mean(v)) for k, v in src_seg_means.items()}

    segments = {}
    order = []
    for r in tgt_rows:
        key = (r.doc_id, r.seg_id)
        if key not in segments:
            segments[key] = []
            order.append(key)
        segments[key].append(r)

    raw = []
    for key in order:
        rows = [r for r in segments[key] if not r.is_expansion]
        lm_vals = [getattr(r, lm_col) for r in rows
                   if not r.is_fp and getattr(r, lm_col) is not None]
        mt_vals = [getattr(r, mt_col) for r in rows
                   if not r.is_fp and getattr(r, mt_col) is not None]
        avs_tgt = float(np.mean(lm_vals)) if lm_vals else None
        avs_mt = float(np.mean(mt_vals)) if mt_vals else None
        avs_src = src_seg_means.get(key)
        prev = None
        for r in rows:
            outcome = 1 if (prev is not None and prev.is_fp) else 0
            prev = r
            if r.is_fp:
                continue
            lm = getattr(r, lm_col)
            mt = getattr(r, mt_col)
            if lm is None or mt is None or not r.aligned_word_id:
                continue
            src_vals = []
            for sid in r.aligned_word_id:
                src_row = src_by_id.get(sid)
                if src_row is not None and getattr(src_row, lm_col) is not None:
                    src_vals.append(getattr(src_row, lm_col))
            if not src_vals:
                continue
            if avs_tgt is None or avs_mt is None or avs_src is None:
                continue
            raw.append(FPObservation(
                outcome=outcome, nxtwS_tgt=lm, nxtwS_src=float(np.mean(src_vals)),
                nxtwS_mt=mt, AvS_tgt=avs_tgt, AvS_src=avs_src, AvS_mt=avs_mt,
                speaker_id=r.speaker_id, doc_id=r.doc_id, direction=direction))

    if not raw:
        return []
    cols = {name: zscore([getattr(o, name) for o in raw], name)
            for name in PREDICTORS}
    for i, obs in enumerate(raw):
        for name in PREDICTORS:
            setattr(obs, name, float(cols[name][i]))
    return raw


def _sigmoid(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def _check_separation(X, y, names):
    pos = y == 1
    for j, name in enumerate(names):
        col = X[:, j]
        a, b = col[pos], col[~pos]
        if a.size and b.size and (a.min() > b.max() or a.max() < b.min()):
            raise SeparationError(name)


def _design(data, predictors):
    X = np.column_stack(
        [np.ones(len(data))] +
        [np.array([getattr(o, p) for o in data], dtype=float) for p in predictors])
    y = np.array([o.outcome for o in data], dtype=float)
    return X, y


def _group_matrix(data, factor):
    labels = [getattr(o, factor) for o in data]
    levels = sorted(set(labels))
    index = {g: k for k, g in enumerate(levels)}
    Z = np.zeros((len(data), len(levels)))
    for i, g in enumerate(labels):
        Z[i, index[g]] = 1.0
    return Z, levels


def _penalized_loglik(y, eta, u, d):
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return ll - 0.5 * float(u @ (d * u))


def _pirls(X, y, Z, d, max_iter, tol):
    """Joint damped Newton over (beta, u) at fixed penalty d."""
    p = X.shape[1]
    q = Z.shape[1]
    beta = np.zeros(p)
    pbar = min(max(float(y.mean()), 1e-9), 1.0 - 1e-9)
    beta[0] = math.log(pbar / (1.0 - pbar))
    u = np.zeros(q)
    trace = []
    for _ in range(max_iter):
        eta = X @ beta + (Z @ u if q else 0.0)
        mu = _sigmoid(eta)
        w = np.clip(mu * (1.0 - mu), 1e-10, None)
        g_beta = X.T @ (y - mu)
        g_u = (Z.T @ (y - mu) - d * u) if q else np.zeros(0)
        grad = np.concatenate([g_beta, g_u])

        Xw = X * w[:, None]
        H_bb = X.T @ Xw
        if q:
            H_bu = Xw.T @ Z
            H_uu = Z.T @ (Z * w[:, None]) + np.diag(d)
            H = np.block([[H_bb, H_bu], [H_bu.T, H_uu]])
        else:
            H = H_bb
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]

        cur = _penalized_loglik(y, eta, u, d)
        trace.append(cur)
        scale = 1.0
        for _ in range(30):
            nb = beta + scale * step[:p]
            nu = u + scale * step[p:]
            if _penalized_loglik(y, X @ nb + (Z @ nu if q else 0.0), nu, d) >= cur - 1e-12:
                break
            scale *= 0.5
        beta = beta + scale * step[:p]
        u = u + scale * step[p:]

        if np.abs(beta).max() > 50.0:
            raise ConvergenceError("coefficients diverged (|beta| > 50)", trace)
        if float(np.abs(scale * step).max()) < tol:
            return beta, u, trace
    raise ConvergenceError(f"no convergence in {max_iter} iterations", trace)


def _laplace_loglik(X, y, Z, d, beta, u):
    q = Z.shape[1]
    eta = X @ beta + (Z @ u if q else 0.0)
    ll_data = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    if not q:
        return ll_data
    mu = _sigmoid(eta)
    w = np.clip(mu * (1.0 - mu), 1e-10, None)
    H_uu = Z.T @ (Z * w[:, None]) + np.diag(d)
    _sign, logdet_huu = np.linalg.slogdet(H_uu)
    return (ll_data - 0.5 * float(u @ (d * u))
            + 0.5 * float(np.sum(np.log(d))) - 0.5 * logdet_huu)


def fit_logistic(data, random_intercepts=("speaker_id",), predictors=PREDICTORS,
                 max_iter: int = 200, tol: float = 1e-9) -> FitResult:
    """Mixed-effects logistic regression of FP occurrence.

    random_intercepts names grouping attributes on the observations (empty
    for a plain GLM).  The variance of each random intercept maximizes the
    Laplace marginal likelihood (bounded scalar search in log space; the EM
    update crawls when a variance sits near zero).  AIC counts one variance
    parameter per factor; C is the concordance of the conditional fitted
    probabilities.
    """
    data = list(data)
    if not data:
        raise ValueError("empty dataset")
    X, y = _design(data, predictors)
    if y.min() == y.max():
        raise ValueError("outcomes are single-class")
    _check_separation(X[:, 1:], y, predictors)

    factors = [f for f in random_intercepts or ()]
    blocks = []
    for f in factors:
        Z_f, levels = _group_matrix(data, f)
        blocks.append((f, Z_f, len(levels)))
    Z = (np.concatenate([b[1] for b in blocks], axis=1)
         if blocks else np.zeros((len(y), 0)))
    q = Z.shape[1]
    p = X.shape[1]
    sigma2 = {f: 1.0 for f in factors}

    def d_vector(s2):
        if not blocks:
            return np.zeros(0)
        return np.concatenate([np.full(n, 1.0 / s2[f]) for f, _, n in blocks])

    def profile(s2):
        d = d_vector(s2)
        beta, u, _ = _pirls(X, y, Z, d, max_iter, tol)
        return _laplace_loglik(X, y, Z, d, beta, u), beta, u

    if q:
        log_lo, log_hi = math.log(1e-8), math.log(1e3)
        for _sweep in range(8):
            previous = dict(sigma2)
            for f in factors:
                def neg(log_s2, f=f):
                    trial = dict(sigma2)
                    trial[f] = math.exp(log_s2)
                    return -profile(trial)[0]
                res = minimize_scalar(neg, bounds=(log_lo, log_hi),
                                      method="bounded",
                                      options={"xatol": 1e-6})
                sigma2[f] = math.exp(res.x)
            if len(factors) == 1 or max(
                    abs(sigma2[f] - previous[f]) for f in factors) < 1e-8:
                break

    d = d_vector(sigma2)
    loglik, beta, u = profile(sigma2)
    eta = X @ beta + (Z @ u if q else 0.0)
    mu = _sigmoid(eta)
    w = np.clip(mu * (1.0 - mu), 1e-10, None)

    # standard errors from the beta block of the inverse penalized Hessian
    Xw = X * w[:, None]
    H_bb = X.T @ Xw
    if q:
        H_bu = Xw.T @ Z
        H_uu = Z.T @ (Z * w[:, None]) + np.diag(d)
        H = np.block([[H_bb, H_bu], [H_bu.T, H_uu]])
    else:
        H = H_bb
    cov = np.linalg.inv(H)
    se = np.sqrt(np.clip(np.diag(cov)[:p], 0.0, None))

    names = ("intercept",) + tuple(predictors)
    k_params = p + len(factors)
    aic = 2.0 * k_params - 2.0 * loglik
    return FitResult(
        coefficients=dict(zip(names, beta.tolist())),
        std_errors=dict(zip(names, se.tolist())),
        aic=aic,
        c=concordance(mu, y.astype(int)),
        n_obs=len(y),
        loglik=loglik,
        variances=dict(sigma2),
        predictors=tuple(predictors),
        fitted=mu,
    )


def concordance(probs, outcomes) -> float:
    """C statistic: fraction of (positive, negative) pairs ranked correctly,
    ties counted as half."""
    probs = np.asarray(probs, dtype=float)
    outcomes = np.asarray(outcomes)
    n1 = int((outcomes == 1).sum())
    n0 = int((outcomes == 0).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("concordance needs both outcome classes")
    ranks = rankdata(probs)  # average ranks handle ties
    s = ranks[outcomes == 1].sum()
    return float((s - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def compare_models(fit_a: FitResult, fit_b: FitResult) -> dict:
    if fit_a.n_obs != fit_b.n_obs:
        raise ValueError(f"fits cover different data: {fit_a.n_obs} vs {fit_b.n_obs}")
    return {
        "delta_aic": fit_b.aic - fit_a.aic,
        "delta_c": fit_b.c - fit_a.c,
        "preferred": "a" if fit_a.aic <= fit_b.aic else "b",
    }


def simulate_observations(n: int, beta, group_sd: float = 0.3,
                          n_groups: int = 40, seed: int = 0,
                          direction: str = "DE-EN") -> list:
    """Draw FPObservations from a known mixed logistic model.

    beta = (intercept, then one coefficient per PREDICTORS entry).  Predictor
    columns are z-scored like the real dataset so recovered coefficients are
    directly comparable to beta.
    """
    beta = np.asarray(beta, dtype=float)
    assert beta.shape == (1 + len(PREDICTORS),)
    rng = np.random.default_rng(seed)
    Xs = rng.normal(size=(n, len(PREDICTORS)))
    Xs = (Xs - Xs.mean(axis=0)) / Xs.std(axis=0)
    groups = rng.integers(0, n_groups, size=n)
    u = rng.normal(scale=group_sd, size=n_groups)
    eta = beta[0] + Xs @ beta[1:] + u[groups]
    y = (rng.random(n) < _sigmoid(eta)).astype(int)
    out = []
    for i in range(n):
        kw = {name: float(Xs[i, j]) for j, name in enumerate(PREDICTORS)}
        out.append(FPObservation(outcome=int(y[i]), speaker_id=f"spk{groups[i]:03d}",
                                 doc_id=f"{groups[i] % 7:03d}", direction=direction,
                                 **kw))
    return out
