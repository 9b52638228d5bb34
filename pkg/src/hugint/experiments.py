"""Experiment drivers behind the command-line interface.

Each ``run_*`` function takes a resolved :class:`ExperimentConfig`, writes its
data files (CSV with schema headers) under ``config.out``, and returns a
summary dict that the CLI folds into the run manifest.  Replicated studies
fan out over a process pool when ``workers > 1``; per-replicate seeds are
spawned from the root seed up front, so results are identical for any worker
count, and aggregation sorts by replicate index before writing.
"""

from __future__ import annotations

import concurrent.futures
import os
from dataclasses import asdict, dataclass

import numpy as np
import scipy.integrate
import scipy.stats

from .constraints import ConstraintMap, QuadricConstraint, SphereConstraint, SphereSlicedConstraint
from .dynamics import convergence_study, reference_solve
from .ellipse import (
    EllipseModel,
    ReducedState,
    classify,
    reduced_solve,
    tangential_speed,
    to_reduced,
)
from .errors import SingularGeometryError
from .integrator import HugParams, PhaseState, hug_step, hug_trajectory
from .output import write_csv
from .projectors import build_bundle
from .sampling import IsotropicGaussian, run_chain as run_sampling_chain

EXPERIMENT_NAMES = (
    "table1",
    "convergence",
    "phase-portrait",
    "foldback",
    "ellipsoid",
    "ecdf",
    "sphere-tail",
    "chain",
)

#: Step sizes of the error table and convergence study.
TABLE_DELTAS = tuple(1.0 / 2**k for k in range(4, 9))

#: The bivariate benchmark: level set of -x1^2 - 4 x2^2 through x0.
BENCH_DIAG = (1.0, 4.0)
BENCH_X0 = (float(np.cos(1.0)), float(0.5 * np.sin(1.0)))
BENCH_V0 = (0.0, 1.0)

#: Fold-back configuration on the same ellipse (speed sqrt(2), K=14).
FOLDBACK_X0 = (1.0, 0.0)
FOLDBACK_V0 = (float(np.sqrt(7.0) / 2.0), 0.5)
FOLDBACK_DELTA = 0.1
FOLDBACK_STEPS = 14

#: Ellipsoid study presets per ambient dimension.
ELLIPSOID_DIAGS = {3: (1.0, 4.0, 3.0), 6: (1.0, 4.0, 3.0, 5.0, 1.0, 10.0)}

#: Normal speeds of the four showcase velocities of the 3-D study.
SHOWCASE_NORMAL_SPEEDS = (0.2023, 0.5673, 0.6647, 0.7357)


class ConfigError(Exception):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ExperimentConfig:
    """Resolved experiment request; unset fields fall back to presets."""

    experiment: str
    out: str = "."
    seed: int = 0
    constraint: dict | None = None
    x0: list | None = None
    v0: list | None = None
    delta: float | None = None
    steps: int | None = None
    t_end: float | None = None
    replicates: int | None = None
    full_scale: bool = False
    workers: int = 1
    # chain settings
    iterations: int | None = None
    walk_scale: float | None = None
    velocity_sigma: float = 1.0
    # sphere-tail settings
    h: float | None = None
    dim: int | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_NAMES:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENT_NAMES)}"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def echo(self) -> dict:
        return asdict(self)


def build_constraint(spec: dict | None, default_diag=None) -> ConstraintMap:
    """Build a constraint map from a config dict.

    Supported kinds: ``quadric`` (with ``diag`` or ``matrix``), ``sphere``
    (with ``dim``), ``sliced`` (with ``dim``).  ``None`` falls back to a
    quadric with ``default_diag``.
    """
    if spec is None:
        if default_diag is None:
            raise ConfigError("this experiment requires a constraint")
        return QuadricConstraint(np.diag(default_diag))
    kind = spec.get("kind")
    try:
        if kind == "quadric":
            if "diag" in spec:
                return QuadricConstraint(np.diag(np.asarray(spec["diag"], dtype=float)))
            return QuadricConstraint(np.asarray(spec["matrix"], dtype=float))
        if kind == "sphere":
            return SphereConstraint(int(spec["dim"]))
        if kind == "sliced":
            return SphereSlicedConstraint(int(spec.get("dim", 3)))
    except KeyError as exc:
        raise ConfigError(f"constraint kind {kind!r} is missing key {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad constraint spec: {exc}") from exc
    raise ConfigError(f"unknown constraint kind {kind!r}")


def uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draw on the unit sphere in R^n via a normalized Gaussian."""
    while True:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
        if norm > 1e-12:
            return g / norm


def sphere_tail_probability(h: float, dim: int, abs_tol: float = 1e-10) -> float:
    """P(|u . v| >= h) for v uniform on the unit sphere in R^dim, fixed unit u.

    The component w = u . v has density proportional to (1 - w^2)^((dim-3)/2)
    on [-1, 1]; the probability is the normalized tail integral, evaluated by
    adaptive quadrature.  For dim = 3 the component is uniform, so the result
    reduces to 1 - h.
    """
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"h must lie in [0, 1], got {h}")
    if dim < 2:
        raise ValueError(f"need dim >= 2, got {dim}")
    if h == 0.0:
        return 1.0
    if h == 1.0:
        return 0.0
    exponent = 0.5 * (dim - 3)

    def integrand(w: float) -> float:
        return (1.0 - w * w) ** exponent

    tail, _ = scipy.integrate.quad(integrand, h, 1.0, epsabs=abs_tol, epsrel=1e-12)
    whole, _ = scipy.integrate.quad(integrand, 0.0, 1.0, epsabs=abs_tol, epsrel=1e-12)
    return tail / whole


def max_distance_run(
    constraint: ConstraintMap,
    x0: np.ndarray,
    v0: np.ndarray,
    delta: float,
    steps: int,
) -> float:
    """max_k ||x_k - x_0|| over a trajectory, without storing it."""
    x, v = np.asarray(x0, float), np.asarray(v0, float)
    start = x.copy()
    d_max = 0.0
    for _ in range(steps):
        x, v = hug_step(constraint, x, v, delta)
        d_max = max(d_max, float(np.linalg.norm(x - start)))
    return d_max


def ecdf_points(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of values as a fraction of their maximum.

    Returns (sorted fractions, cumulative probabilities); the ECDF rises from
    1/N at the smallest fraction to exactly 1 at fraction 1.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one value")
    fractions = np.sort(values / values.max())
    return fractions, np.arange(1, values.size + 1) / values.size


# ---------------------------------------------------------------------------
# error table and convergence study


def run_table1(config: ExperimentConfig) -> dict:
    """One- and two-step position errors of the benchmark across step sizes."""
    constraint = build_constraint(config.constraint, default_diag=BENCH_DIAG)
    initial = PhaseState(np.asarray(config.x0 or BENCH_X0), np.asarray(config.v0 or BENCH_V0))
    deltas = np.asarray(TABLE_DELTAS)
    one = np.empty(len(deltas))
    two = np.empty(len(deltas))
    for i, delta in enumerate(deltas):
        sol = reference_solve(constraint, initial, np.array([0.0, delta, 2.0 * delta]))
        x1, v1 = hug_step(constraint, initial.x, initial.v, delta)
        x2, _ = hug_step(constraint, x1, v1, delta)
        one[i] = np.linalg.norm(x1 - sol.xs[1])
        two[i] = np.linalg.norm(x2 - sol.xs[2])
    rows = []
    for i, delta in enumerate(deltas):
        rows.append(
            (
                delta,
                one[i],
                two[i],
                one[i - 1] / one[i] if i else None,
                two[i - 1] / two[i] if i else None,
            )
        )
    write_csv(
        os.path.join(config.out, "error_table.csv"),
        "error-table/1",
        ["delta", "one_step_error", "two_step_error", "one_step_ratio", "two_step_ratio"],
        rows,
    )
    return {
        "deltas": deltas.tolist(),
        "one_step_errors": one.tolist(),
        "two_step_errors": two.tolist(),
        "note": "ratio columns show the decay per halving of delta (~4 for one-step, ~8 for two-step)",
    }


def run_convergence(config: ExperimentConfig) -> dict:
    """Order measurement: one-step, two-step, and global errors with fitted slopes."""
    constraint = build_constraint(config.constraint, default_diag=BENCH_DIAG)
    initial = PhaseState(np.asarray(config.x0 or BENCH_X0), np.asarray(config.v0 or BENCH_V0))
    horizon = config.t_end if config.t_end is not None else 1.0
    study = convergence_study(constraint, initial, np.asarray(TABLE_DELTAS), horizon=horizon)
    write_csv(
        os.path.join(config.out, "convergence.csv"),
        "convergence/1",
        ["delta", "one_step_error", "two_step_error", "global_error"],
        zip(study.deltas, study.one_step, study.two_step, study.global_err),
    )
    return {
        "horizon": horizon,
        "one_step_order": study.one_step_order,
        "two_step_order": study.two_step_order,
        "global_order": study.global_order,
    }


# ---------------------------------------------------------------------------
# reduced ellipse experiments


def _ellipse_model(config: ExperimentConfig) -> EllipseModel:
    constraint = config.constraint or {"kind": "quadric", "diag": [1.0, 4.0]}
    if constraint.get("kind") != "quadric":
        raise ConfigError("ellipse experiments need a quadric constraint")
    diag = constraint.get("diag")
    if diag is None or len(diag) != 2:
        raise ConfigError("ellipse experiments need a 2-entry quadric diagonal")
    return EllipseModel(a=float(diag[0]), b=float(diag[1]))


def run_phase_portrait(config: ExperimentConfig) -> dict:
    """Classified grid of reduced initial conditions with sampled orbits."""
    model = _ellipse_model(config)
    speed = float(np.sqrt(2.0))
    t_end = config.t_end if config.t_end is not None else 6.0
    phis = np.linspace(-0.75 * np.pi, 0.75 * np.pi, 7)
    ps = np.linspace(-speed, speed, 9)
    sample_times = np.arange(0.0, t_end + 0.05, 0.05)
    class_rows = []
    orbit_rows = []
    counts = {"rotation": 0, "libration": 0, "separatrix": 0}
    point_id = 0
    for p0 in ps:
        for phi0 in phis:
            state = ReducedState(phi=float(phi0), p=float(p0), speed=speed)
            result = classify(model, state)
            counts[result.kind] += 1
            phi_min, phi_max = result.turning_points or (None, None)
            class_rows.append(
                (point_id, phi0, p0, result.kind, result.kappa, phi_min, phi_max)
            )
            orbit = reduced_solve(
                model, state, sample_times, steps_per_unit=256.0, check_tol=1e-7
            )
            for t, (phi, p) in zip(sample_times, orbit):
                orbit_rows.append((point_id, t, phi, p))
            point_id += 1
    write_csv(
        os.path.join(config.out, "portrait_classification.csv"),
        "portrait-classification/1",
        ["point_id", "phi0", "p0", "kind", "kappa", "phi_min", "phi_max"],
        class_rows,
    )
    write_csv(
        os.path.join(config.out, "portrait_orbits.csv"),
        "portrait-orbits/1",
        ["point_id", "t", "phi", "p"],
        orbit_rows,
    )
    return {"speed": speed, "grid": [len(phis), len(ps)], "counts": counts}


def run_foldback(config: ExperimentConfig) -> dict:
    """Discrete fold-back trajectory with the flow it shadows."""
    model = _ellipse_model(config)
    constraint = QuadricConstraint(np.diag([model.a, model.b]))
    delta = config.delta if config.delta is not None else FOLDBACK_DELTA
    steps = config.steps if config.steps is not None else FOLDBACK_STEPS
    initial = PhaseState(
        np.asarray(config.x0 or FOLDBACK_X0), np.asarray(config.v0 or FOLDBACK_V0)
    )
    trajectory = hug_trajectory(constraint, initial, HugParams(delta, steps))
    tangential = np.array(
        [tangential_speed(model, x, v) for x, v in zip(trajectory.xs, trajectory.vs)]
    )
    signs = np.sign(tangential)
    sign_changes = int(np.sum(signs[1:] != signs[:-1]))

    t_end = delta * steps
    dense_times = np.arange(0.0, t_end + 0.01, 0.01)
    flow = reference_solve(constraint, initial, dense_times)
    step_indices = np.round(trajectory.times / 0.01).astype(int)
    tracking_gap = float(
        np.max(np.linalg.norm(trajectory.xs - flow.xs[step_indices], axis=1))
    )

    reduced0, _ = to_reduced(model, initial)
    result = classify(model, reduced0)

    write_csv(
        os.path.join(config.out, "foldback_steps.csv"),
        "foldback-steps/1",
        ["k", "t", "x1", "x2", "v1", "v2", "tangential_speed"],
        (
            (k, trajectory.times[k], *trajectory.xs[k], *trajectory.vs[k], tangential[k])
            for k in range(steps + 1)
        ),
    )
    write_csv(
        os.path.join(config.out, "foldback_flow.csv"),
        "foldback-flow/1",
        ["t", "x1", "x2", "v1", "v2"],
        ((t, *flow.xs[i], *flow.vs[i]) for i, t in enumerate(dense_times)),
    )
    return {
        "classification": result.kind,
        "kappa": result.kappa,
        "turning_points": result.turning_points,
        "tangential_sign_changes": sign_changes,
        "max_tracking_gap": tracking_gap,
        "max_distance_from_start": float(
            np.max(np.linalg.norm(trajectory.xs - initial.x, axis=1))
        ),
    }


# ---------------------------------------------------------------------------
# ellipsoid exploration studies


def _ellipsoid_setup(config: ExperimentConfig, dim: int):
    if config.constraint is not None:
        constraint = build_constraint(config.constraint)
    else:
        if dim not in ELLIPSOID_DIAGS:
            raise ConfigError(f"no ellipsoid preset for dim={dim}; pass a constraint")
        constraint = QuadricConstraint(np.diag(ELLIPSOID_DIAGS[dim]))
    n = constraint.ambient_dim
    x0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else np.eye(n)[0]
    if x0.shape != (n,):
        raise ConfigError(f"x0 must have {n} entries")
    return constraint, x0


def _ellipsoid_replicate(task) -> tuple[int, float, float]:
    index, diag, x0, delta, steps, seed_seq = task
    constraint = QuadricConstraint(np.diag(np.asarray(diag)))
    x0 = np.asarray(x0)
    rng = np.random.default_rng(seed_seq)
    v0 = uniform_sphere(rng, x0.size)
    bundle = build_bundle(constraint, x0)
    v_perp_norm = float(np.linalg.norm(bundle.normal @ v0))
    try:
        d_max = max_distance_run(constraint, x0, v0, delta, steps)
    except SingularGeometryError:
        d_max = float("nan")
    return index, v_perp_norm, d_max


def _run_replicated(tasks: list, worker, workers: int) -> list:
    if workers <= 1:
        results = [worker(task) for task in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return sorted(results, key=lambda item: item[0])


def _scatter_study(
    constraint: ConstraintMap,
    x0: np.ndarray,
    delta: float,
    steps: int,
    replicates: int,
    seed: int,
    workers: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """(v_perp_norms, d_max values, failed count) over random unit velocities."""
    if not isinstance(constraint, QuadricConstraint):
        raise ConfigError("the ellipsoid study expects a quadric constraint")
    diag = tuple(np.diag(constraint.A))
    children = np.random.SeedSequence(seed).spawn(replicates)
    tasks = [(i, diag, tuple(x0), delta, steps, children[i]) for i in range(replicates)]
    results = _run_replicated(tasks, _ellipsoid_replicate, workers)
    v_perp = np.array([r[1] for r in results])
    d_max = np.array([r[2] for r in results])
    failed = int(np.sum(~np.isfinite(d_max)))
    return v_perp, d_max, failed


def _showcase_velocity(normal_speed: float, n: int) -> np.ndarray:
    """Unit velocity at x0 = e1 with a prescribed normal-component norm.

    At x0 = e1 on a diagonal quadric the unit normal is e1, so
    v = s e1 + sqrt(1 - s^2) u with u a fixed unit tangent (here the
    normalized sum of e2 and e3).
    """
    u = np.zeros(n)
    u[1] = u[2] = 1.0 / np.sqrt(2.0)
    return normal_speed * np.eye(n)[0] + np.sqrt(1.0 - normal_speed**2) * u


def run_ellipsoid(config: ExperimentConfig) -> dict:
    """Scatter of (||v_perp(0)||, d_max) over random velocities, plus ECDF."""
    dim = config.dim if config.dim is not None else 3
    constraint, x0 = _ellipsoid_setup(config, dim)
    delta = config.delta if config.delta is not None else 0.01
    steps = config.steps if config.steps is not None else (10000 if config.full_scale else 1000)
    replicates = (
        config.replicates
        if config.replicates is not None
        else (10000 if config.full_scale else 1000)
    )
    v_perp, d_max, failed = _scatter_study(
        constraint, x0, delta, steps, replicates, config.seed, config.workers
    )
    ok = np.isfinite(d_max)
    write_csv(
        os.path.join(config.out, "ellipsoid_scatter.csv"),
        "ellipsoid-scatter/1",
        ["replicate", "v_perp_norm", "d_max"],
        zip(range(replicates), v_perp, d_max),
    )
    fractions, probs = ecdf_points(d_max[ok])
    write_csv(
        os.path.join(config.out, "ellipsoid_ecdf.csv"),
        "ellipsoid-ecdf/1",
        ["d_max_fraction", "cumulative_probability"],
        zip(fractions, probs),
    )
    correlation = scipy.stats.spearmanr(v_perp[ok], d_max[ok]).statistic

    summary = {
        "dim": constraint.ambient_dim,
        "delta": delta,
        "steps": steps,
        "replicates": replicates,
        "failed_replicates": failed,
        "spearman_rank_correlation": float(correlation),
        "sup_d_max": float(d_max[ok].max()),
    }

    if constraint.ambient_dim >= 3 and config.x0 is None:
        showcase_rows = []
        for s in SHOWCASE_NORMAL_SPEEDS:
            v0 = _showcase_velocity(s, constraint.ambient_dim)
            showcase_rows.append(
                (s, max_distance_run(constraint, x0, v0, delta, steps))
            )
        write_csv(
            os.path.join(config.out, "ellipsoid_showcase.csv"),
            "ellipsoid-showcase/1",
            ["v_perp_norm", "d_max"],
            showcase_rows,
        )
        summary["showcase_d_max"] = [row[1] for row in showcase_rows]
    return summary


def run_ecdf(config: ExperimentConfig) -> dict:
    """Matched-K comparison of d_max ECDFs for the 3-D and 6-D presets."""
    delta = config.delta if config.delta is not None else 0.01
    steps = config.steps if config.steps is not None else (1000 if config.full_scale else 100)
    replicates = (
        config.replicates
        if config.replicates is not None
        else (10000 if config.full_scale else 500)
    )
    summary: dict = {"delta": delta, "steps": steps, "replicates": replicates, "dims": {}}
    means = {}
    for dim in (3, 6):
        constraint = QuadricConstraint(np.diag(ELLIPSOID_DIAGS[dim]))
        x0 = np.eye(dim)[0]
        v_perp, d_max, failed = _scatter_study(
            constraint, x0, delta, steps, replicates, config.seed + dim, config.workers
        )
        ok = np.isfinite(d_max)
        fractions, probs = ecdf_points(d_max[ok])
        write_csv(
            os.path.join(config.out, f"ecdf_n{dim}.csv"),
            "ellipsoid-ecdf/1",
            ["d_max_fraction", "cumulative_probability"],
            zip(fractions, probs),
        )
        mean = float(fractions.mean())
        stderr = float(fractions.std(ddof=1) / np.sqrt(fractions.size))
        means[dim] = (mean, stderr)
        summary["dims"][str(dim)] = {
            "mean_fraction": mean,
            "stderr": stderr,
            "failed_replicates": failed,
        }
    summary["higher_dim_mean_fraction_larger"] = bool(means[6][0] > means[3][0])
    return summary


# ---------------------------------------------------------------------------
# tail probability and sampling chain


def run_sphere_tail(config: ExperimentConfig) -> dict:
    if config.h is None or config.dim is None:
        raise ConfigError("sphere-tail needs both h and dim")
    try:
        probability = sphere_tail_probability(config.h, config.dim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_csv(
        os.path.join(config.out, "sphere_tail.csv"),
        "sphere-tail/1",
        ["h", "dim", "probability"],
        [(config.h, config.dim, probability)],
    )
    return {"h": config.h, "dim": config.dim, "probability": probability}


def run_chain(config: ExperimentConfig) -> dict:
    """Sampling run on a diagonal Gaussian target with interleaved random walks."""
    constraint = build_constraint(config.constraint, default_diag=BENCH_DIAG)
    if not isinstance(constraint, QuadricConstraint):
        raise ConfigError("the chain experiment expects a quadric (Gaussian) target")
    n = constraint.ambient_dim
    x0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else np.eye(n)[0]
    iterations = config.iterations if config.iterations is not None else 20000
    params = HugParams(
        step_size=config.delta if config.delta is not None else 0.1,
        steps=config.steps if config.steps is not None else 10,
    )
    walk_scale = config.walk_scale if config.walk_scale is not None else 0.5
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    velocity = IsotropicGaussian(dim=n, sigma=config.velocity_sigma)
    chain = run_sampling_chain(
        constraint, x0, params, velocity, rng, iterations, walk_scale=walk_scale
    )

    write_csv(
        os.path.join(config.out, "chain.csv"),
        "chain/1",
        ["iteration"] + [f"x{i+1}" for i in range(n)],
        ((i, *state) for i, state in enumerate(chain.states)),
    )
    burn = min(1000, iterations // 10)
    samples = chain.states[burn:]
    second_moments = (samples**2).mean(axis=0)
    target_moments = 0.5 / np.diag(constraint.A)
    return {
        "iterations": iterations,
        "burn_in": burn,
        "hug_acceptance_rate": chain.hug_acceptance_rate,
        "walk_acceptance_rate": chain.walk_acceptance_rate,
        "singular_rejections": chain.singular_rejections,
        "second_moments": second_moments.tolist(),
        "target_second_moments": target_moments.tolist(),
    }


RUNNERS = {
    "table1": run_table1,
    "convergence": run_convergence,
    "phase-portrait": run_phase_portrait,
    "foldback": run_foldback,
    "ellipsoid": run_ellipsoid,
    "ecdf": run_ecdf,
    "sphere-tail": run_sphere_tail,
    "chain": run_chain,
}
