"""Plug-and-play iterative solvers and their step-size machinery.

Four schemes are provided.  The stochastic gradient scheme updates

    X_{k+1} = X_k + delta_k * ( -grad F(X_k)
                                + (alpha/eps) * (D(X_k) - X_k)
                                + Z_{k+1} )

with i.i.d. standard Gaussian noise Z when enabled (the noise enters scaled
by delta_k, matching the plain stochastic-gradient recursion; this is not a
Langevin discretisation).  The splitting schemes fold the regularisation
weight into the data term by using the prox/gradient step eps/alpha:

    ADMM:  x <- prox_F(z - u, eps/alpha); z <- D(x + u); u <- u + x - z
    FBS:   x <- D(x - (eps/alpha) * grad F(x))
    BBS:   x <- D(prox_F(x, eps/alpha))

For the hard-constraint (inpainting) data term the stochastic scheme runs
in the reduced space of hidden pixels, and a coarse-to-fine driver chains
runs over a decreasing sequence of denoiser levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .denoisers import Denoiser
from .exceptions import ConfigurationError, DivergenceError
from .likelihoods import GaussianLikelihood, HardConstraintLikelihood
from .metrics import psnr, ssim


# ---------------------------------------------------------------------------
# step sizes and schedules
# ---------------------------------------------------------------------------

def delta_stable(alpha: float, epsilon: float, residual_l: float,
                 lik: GaussianLikelihood | None = None) -> float:
    """Largest constant step with monotone deterministic descent: 2 / L_tot.

    ``L_tot = alpha * residual_l / epsilon + ||A* A|| / sigma^2`` is the
    Lipschitz constant of the drift; the data term contributes nothing when
    ``lik`` is None (hard-constraint problems in the reduced space).  The
    customary burn-in step for denoising/deblurring is ``delta_stable / 6``.
    """
    if alpha <= 0 or epsilon <= 0 or residual_l < 0:
        raise ConfigurationError("alpha, epsilon must be > 0 and residual_l >= 0")
    l_tot = alpha * residual_l / epsilon
    if lik is not None:
        l_tot += lik.gradient_lipschitz
    if l_tot <= 0:
        raise ConfigurationError("total Lipschitz constant is zero; no stable step")
    return 2.0 / l_tot


@dataclass(frozen=True)
class StepSchedule:
    """Constant burn-in followed by polynomially decaying steps.

    ``step(k)`` is delta0 for k <= n_burnin and
    ``delta0 * (k - n_burnin)**(-decay_exponent)`` afterwards.  With an
    exponent in (0.5, 1] the decaying phase has divergent step sum and
    finite squared sum, the conditions required for convergence of the
    stochastic scheme; the deterministic variant only needs the steps to
    vanish, so exponents in (0, 0.5] are allowed when noise is off.
    """

    delta0: float
    n_burnin: int = 0
    decay_exponent: float = 0.8
    mode: str = "constant-then-decay"

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ConfigurationError("delta0 must be > 0")
        if self.n_burnin < 0:
            raise ConfigurationError("n_burnin must be >= 0")
        if self.mode not in ("constant-then-decay", "constant"):
            raise ConfigurationError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "constant-then-decay" and not 0.0 < self.decay_exponent <= 1.0:
            raise ConfigurationError("decay exponent must lie in (0, 1]")

    def step(self, k: int) -> float:
        if self.mode == "constant" or k <= self.n_burnin:
            return self.delta0
        return self.delta0 * (k - self.n_burnin) ** (-self.decay_exponent)

    def validate_stochastic(self) -> None:
        """Require the step conditions of the stochastic convergence theory."""
        if self.mode == "constant-then-decay" and not 0.5 < self.decay_exponent <= 1.0:
            raise ConfigurationError(
                "stochastic runs need a decay exponent in (0.5, 1] so the step "
                "sum diverges while the squared sum stays finite"
            )


# ---------------------------------------------------------------------------
# configuration, stop rules, traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedIterations:
    """Run for exactly this many iterations (capped by cfg.max_iters)."""
    iterations: int


@dataclass(frozen=True)
class PsnrPlateau:
    """End the constant-step phase once the PSNR stops moving.

    The burn-in ends at the first iteration in [min_iters, max_iters] where
    |PSNR_{k+1} - PSNR_k| < factor * delta0; afterwards the decaying phase
    runs until cfg.max_iters.  Requires a reference image.
    """
    factor: float = 0.1
    min_iters: int = 0
    max_iters: int | None = None


@dataclass(frozen=True)
class ResidualTolerance:
    """Stop when the step-normalised residual drops below tol."""
    tol: float = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    epsilon: float | None = None
    max_iters: int = 500
    seed: int = 0
    noise_enabled: bool = False
    stop_rule: object = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be > 0")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")


@dataclass
class RunTrace:
    """Per-iteration record of one solver run.

    ``steps`` holds the step (or prox parameter) used at each iteration,
    ``drift_norms`` the norm of the deterministic drift (stochastic schemes
    only; NaN for splitting schemes), ``residuals`` the scheme's
    fixed-point residual.  ``psnrs``/``ssims`` are filled when a reference
    image is supplied.  ``final`` is the returned iterate; for ADMM,
    ``final_x`` additionally holds the last data-side iterate.  ``levels``
    marks (start_index, epsilon) of each stage of a coarse-to-fine run.
    """

    steps: list = field(default_factory=list)
    drift_norms: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    psnrs: list = field(default_factory=list)
    ssims: list = field(default_factory=list)
    final: np.ndarray | None = None
    final_x: np.ndarray | None = None
    levels: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.steps)

    def extend(self, other: "RunTrace", epsilon: float) -> None:
        """Append another run as a new coarse-to-fine level."""
        self.levels.append((self.iterations, epsilon))
        self.steps.extend(other.steps)
        self.drift_norms.extend(other.drift_norms)
        self.residuals.extend(other.residuals)
        self.psnrs.extend(other.psnrs)
        self.ssims.extend(other.ssims)
        self.final = other.final
        self.final_x = other.final_x


def _resolve_epsilon(cfg: SolverConfig, denoiser: Denoiser) -> float:
    eps = cfg.epsilon if cfg.epsilon is not None else denoiser.epsilon
    den_eps = getattr(denoiser, "epsilon", None)
    if den_eps is not None and abs(den_eps - eps) > 1e-15 * max(eps, den_eps):
        raise ConfigurationError(
            f"config epsilon {eps} does not match denoiser epsilon {den_eps}"
        )
    return float(eps)


def _iteration_budget(cfg: SolverConfig, default: int | None = None) -> int:
    rule = cfg.stop_rule
    if isinstance(rule, FixedIterations):
        return min(rule.iterations, cfg.max_iters)
    if rule is None and default is not None:
        return min(default, cfg.max_iters)
    return cfg.max_iters


def _check_finite(x, reference_norm, k, last=None):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(
            f"iterate became non-finite at iteration {k}",
            last_iterate=last, iteration=k,
        )
    if np.linalg.norm(x) > 1e6 * max(reference_norm, 1.0):
        raise DivergenceError(
            f"iterate norm exceeded 1e6 x initial at iteration {k}",
            last_iterate=last, iteration=k,
        )


def _track_metrics(trace: RunTrace, x, reference, track_ssim: bool):
    if reference is None:
        return None
    value = psnr(x, reference)
    trace.psnrs.append(value)
    if track_ssim:
        trace.ssims.append(ssim(x, reference))
    return value


# ---------------------------------------------------------------------------
# stochastic gradient scheme
# ---------------------------------------------------------------------------

def pnp_sgd(lik: GaussianLikelihood, denoiser: Denoiser, cfg: SolverConfig,
            schedule: StepSchedule, x0, reference=None, track_ssim: bool = False):
    """Stochastic (or deterministic) gradient scheme on the smoothed posterior.

    Parameters
    ----------
    lik : GaussianLikelihood
        Differentiable data term.
    denoiser : Denoiser
        The plug-in denoiser; its level must agree with cfg.epsilon.
    cfg : SolverConfig
        alpha, epsilon, noise flag, seed, iteration cap and stop rule.
    schedule : StepSchedule
        Burn-in step and decay.  With a PSNR-plateau stop rule the burn-in
        length is decided online and the schedule's own n_burnin is ignored.
    x0 : array
        Initial iterate.
    reference : array, optional
        Ground truth for PSNR tracking (required by the plateau rule).

    Returns
    -------
    (x, trace) : the final iterate and the per-iteration trace.
    """
    eps = _resolve_epsilon(cfg, denoiser)
    if cfg.noise_enabled:
        schedule.validate_stochastic()
    rule = cfg.stop_rule
    if isinstance(rule, PsnrPlateau) and reference is None:
        raise ConfigurationError("the PSNR-plateau rule needs a reference image")

    x = np.array(x0, dtype=np.float64)
    norm0 = float(np.linalg.norm(x))
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    scale = cfg.alpha / eps

    plateau_burnin = None  # set once the plateau rule ends the constant phase
    psnr_prev = psnr(x, reference) if reference is not None else None
    n_iters = _iteration_budget(cfg)

    for k in range(n_iters):
        if isinstance(rule, PsnrPlateau):
            if plateau_burnin is None:
                delta = schedule.delta0
            else:
                delta = schedule.delta0 * (k - plateau_burnin) ** (-schedule.decay_exponent)
        else:
            delta = schedule.step(k)

        drift = -lik.grad(x) + scale * (denoiser(x) - x)
        trace.steps.append(delta)
        drift_norm = float(np.linalg.norm(drift))
        trace.drift_norms.append(drift_norm)

        update = drift
        if cfg.noise_enabled:
            update = drift + rng.standard_normal(x.shape)
        x_new = x + delta * update
        _check_finite(x_new, norm0, k, last=x)
        trace.residuals.append(float(np.linalg.norm(x_new - x)))
        psnr_new = _track_metrics(trace, x_new, reference, track_ssim)
        x = x_new

        if isinstance(rule, PsnrPlateau) and plateau_burnin is None:
            hit = (k >= rule.min_iters
                   and abs(psnr_new - psnr_prev) < rule.factor * schedule.delta0)
            exhausted = rule.max_iters is not None and k + 1 >= rule.max_iters
            if hit or exhausted:
                plateau_burnin = k
        if isinstance(rule, ResidualTolerance) and drift_norm <= rule.tol:
            break
        psnr_prev = psnr_new

    trace.final = x
    return x, trace


def reduced_space_sgd(lik: HardConstraintLikelihood, denoiser: Denoiser,
                      cfg: SolverConfig, schedule: StepSchedule, x0,
                      reference=None, track_ssim: bool = False):
    """Stochastic gradient scheme on the hidden pixels of an inpainting problem.

    The iterate lives in the reduced space of hidden pixels; every full
    grid is reassembled as hidden values plus the observed data, so the
    constraint holds bit-exactly at all times.  The drift is the hidden
    restriction of the denoiser residual scaled by alpha/eps.
    """
    eps = _resolve_epsilon(cfg, denoiser)
    if cfg.noise_enabled:
        schedule.validate_stochastic()
    if isinstance(cfg.stop_rule, PsnrPlateau):
        raise ConfigurationError("use fixed iterations or a residual rule here")

    split = lik.split
    full = lik.project(np.array(x0, dtype=np.float64))
    hidden = split.hidden_values(full)
    norm0 = float(np.linalg.norm(hidden))
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    scale = cfg.alpha / eps
    rule = cfg.stop_rule
    n_iters = _iteration_budget(cfg)

    for k in range(n_iters):
        delta = schedule.step(k)
        full = split.embed(hidden, lik.y)
        residual_grid = full - denoiser(full)
        drift = -scale * split.hidden_values(residual_grid)
        trace.steps.append(delta)
        drift_norm = float(np.linalg.norm(drift))
        trace.drift_norms.append(drift_norm)

        update = drift
        if cfg.noise_enabled:
            update = drift + rng.standard_normal(hidden.shape)
        hidden_new = hidden + delta * update
        _check_finite(hidden_new, norm0, k, last=split.embed(hidden, lik.y))
        trace.residuals.append(float(np.linalg.norm(hidden_new - hidden)))
        _track_metrics(trace, split.embed(hidden_new, lik.y), reference, track_ssim)
        hidden = hidden_new
        if isinstance(rule, ResidualTolerance) and drift_norm <= rule.tol:
            break

    out = split.embed(hidden, lik.y)
    trace.final = out
    return out, trace


# ---------------------------------------------------------------------------
# splitting schemes
# ---------------------------------------------------------------------------

def pnp_admm(lik, denoiser: Denoiser, cfg: SolverConfig, x0,
             reference=None, track_ssim: bool = False):
    """ADMM with the denoiser as the prior-side proximal map.

    The data-side update is the likelihood prox with parameter eps/alpha;
    the returned iterate is the denoised consensus variable z (the last
    data-side iterate is kept in the trace as ``final_x``).  The recorded
    residual is ||x_{k+1} - z_{k+1}||.
    """
    eps = _resolve_epsilon(cfg, denoiser)
    gamma = eps / cfg.alpha
    x = np.array(x0, dtype=np.float64)
    z = x.copy()
    u = np.zeros_like(x)
    norm0 = float(np.linalg.norm(x))
    trace = RunTrace()
    rule = cfg.stop_rule
    n_iters = _iteration_budget(cfg, default=100)

    for k in range(n_iters):
        z_prev = z
        x = lik.prox(z - u, gamma)
        z = denoiser(x + u)
        u = u + x - z
        _check_finite(z, norm0, k, last=z_prev)
        residual = float(np.linalg.norm(x - z))
        trace.steps.append(gamma)
        trace.drift_norms.append(float("nan"))
        trace.residuals.append(residual)
        _track_metrics(trace, z, reference, track_ssim)
        if isinstance(rule, ResidualTolerance) and residual <= rule.tol:
            break

    trace.final = z
    trace.final_x = x
    return z, trace


def _fbs_gate_text(lik, denoiser: Denoiser, cfg: SolverConfig, eps: float) -> str:
    residual_l = denoiser.residual_lipschitz_bound
    assumed = ""
    if residual_l is None:
        residual_l = 1.0
        assumed = " (residual constant not certified; assumed 1)"
    report = diagnostics.gate_fbs_ryu(
        cfg.alpha, eps, lik.sigma, residual_l,
        min_singular=getattr(lik.op, "min_singular", 0.0),
    )
    margin = "" if report.margin is None else f", margin {float(report.margin):.3g}"
    return f"step condition {report.verdict}{margin}{assumed}"


def pnp_fbs(lik: GaussianLikelihood, denoiser: Denoiser, cfg: SolverConfig, x0,
            reference=None, track_ssim: bool = False):
    """Forward-backward splitting: denoise after an explicit gradient step.

    Requires a differentiable data term.  On blow-up the raised error
    reports the step-condition gate so failures are diagnosable.
    """
    if not hasattr(lik, "grad"):
        raise ConfigurationError("forward-backward needs a differentiable data term")
    eps = _resolve_epsilon(cfg, denoiser)
    step = eps / cfg.alpha
    x = np.array(x0, dtype=np.float64)
    norm0 = float(np.linalg.norm(x))
    trace = RunTrace()
    rule = cfg.stop_rule
    n_iters = _iteration_budget(cfg, default=500)

    for k in range(n_iters):
        x_new = denoiser(x - step * lik.grad(x))
        try:
            _check_finite(x_new, norm0, k, last=x)
        except DivergenceError as err:
            raise DivergenceError(
                f"{err} [{_fbs_gate_text(lik, denoiser, cfg, eps)}]",
                last_iterate=x, iteration=k,
            ) from None
        residual = float(np.linalg.norm(x_new - x))
        trace.steps.append(step)
        trace.drift_norms.append(float("nan"))
        trace.residuals.append(residual)
        _track_metrics(trace, x_new, reference, track_ssim)
        x = x_new
        if isinstance(rule, ResidualTolerance) and residual <= rule.tol:
            break

    trace.final = x
    return x, trace


def pnp_bbs(lik, denoiser: Denoiser, cfg: SolverConfig, x0,
            reference=None, track_ssim: bool = False):
    """Backward-backward splitting: denoise after the likelihood prox."""
    eps = _resolve_epsilon(cfg, denoiser)
    gamma = eps / cfg.alpha
    x = np.array(x0, dtype=np.float64)
    norm0 = float(np.linalg.norm(x))
    trace = RunTrace()
    rule = cfg.stop_rule
    n_iters = _iteration_budget(cfg, default=500)

    for k in range(n_iters):
        x_new = denoiser(lik.prox(x, gamma))
        _check_finite(x_new, norm0, k, last=x)
        residual = float(np.linalg.norm(x_new - x))
        trace.steps.append(gamma)
        trace.drift_norms.append(float("nan"))
        trace.residuals.append(residual)
        _track_metrics(trace, x_new, reference, track_ssim)
        x = x_new
        if isinstance(rule, ResidualTolerance) and residual <= rule.tol:
            break

    trace.final = x
    return x, trace


# ---------------------------------------------------------------------------
# coarse-to-fine driver
# ---------------------------------------------------------------------------

def coarse_to_fine(lik, denoiser_family, cfg: SolverConfig, x0,
                   solver: str = "sgd", burnin_iters: int = 2000,
                   decay_iters: int = 1000, step_scale: float = 2.5,
                   residual_l: float | None = None, reference=None,
                   track_ssim: bool = False):
    """Chain solver runs over denoisers with strictly decreasing levels.

    Each level is solved with the configured solver and its result warm
    starts the next, finer level.  For the stochastic solver each level
    runs ``burnin_iters`` constant steps at ``step_scale * delta_stable``
    followed by ``decay_iters`` decaying steps; for ADMM the same total
    iteration budget is reused.  Traces are concatenated with one
    (start_index, epsilon) marker per level.
    """
    family = list(denoiser_family)
    if not family:
        raise ConfigurationError("need at least one denoiser level")
    eps_list = [d.epsilon for d in family]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigurationError("denoiser levels must be strictly decreasing")
    if solver not in ("sgd", "admm", "bbs"):
        raise ConfigurationError(f"unsupported coarse-to-fine solver {solver!r}")

    hard = isinstance(lik, HardConstraintLikelihood)
    budget = burnin_iters + decay_iters
    x = np.array(x0, dtype=np.float64)
    trace = RunTrace()

    for level, den in enumerate(family):
        seed = int(np.random.SeedSequence([cfg.seed, level]).generate_state(1)[0])
        level_cfg = replace(cfg, epsilon=den.epsilon, seed=seed,
                            max_iters=budget, stop_rule=FixedIterations(budget))
        if solver == "sgd":
            rl = residual_l
            if rl is None:
                rl = den.residual_lipschitz_bound
            if rl is None:
                rl = 1.0
            ds = delta_stable(cfg.alpha, den.epsilon, rl,
                              lik if isinstance(lik, GaussianLikelihood) else None)
            sched = StepSchedule(delta0=step_scale * ds, n_burnin=burnin_iters)
            runner = reduced_space_sgd if hard else pnp_sgd
            x, level_trace = runner(lik, den, level_cfg, sched, x,
                                    reference=reference, track_ssim=track_ssim)
        elif solver == "admm":
            x, level_trace = pnp_admm(lik, den, level_cfg, x,
                                      reference=reference, track_ssim=track_ssim)
        else:
            x, level_trace = pnp_bbs(lik, den, level_cfg, x,
                                     reference=reference, track_ssim=track_ssim)
        trace.extend(level_trace, den.epsilon)

    return x, trace
