"""Config-driven experiment pipeline.

Stages form a linear chain over one artifact directory:

    verify-dt -> fom-solve -> pod -> sample -> train -> rom-solve -> report

Each stage is runnable on its own against the directory and fails with a
StageError naming the stage that should have produced a missing input.
Deterministic artifacts (snapshots, bases, datasets, models, trajectories,
error tables) are separated from wall-clock records (timings.txt and the
time columns of the summary/pareto tables), so reruns with one seed are
bit-identical outside those files.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import io
from .analysis import (
    ParetoPoint,
    error_series,
    evaluate_bound,
    pareto_csv,
    pareto_frontier,
    runtime_ratios,
)
from .core import StageError, TimeGrid
from .integration import (
    DEFAULT_STEP_COUNTS,
    IntegratorSpec,
    TrajectoryResult,
    integrate,
    verify_timestep,
)
from .problems import get_problem
from .reduction import GalerkinROM, ReducedBasis, SnapshotMatrix, pod_fit
from .regressors import RegressorSpec, fit as fit_regressor, load_model, save_model
from .sampling import (
    DEFAULT_CANDIDATE_ROUNDS,
    DEFAULT_N_TRAINING,
    DEFAULT_N_VALIDATION,
    LhsConfig,
    TrainingSet,
    build_training_set,
    joint_box,
    lhs_maximin,
    reduced_state_box,
)
from .surrogate import RegressionROM

STAGES = ("verify-dt", "fom-solve", "pod", "sample", "train", "rom-solve", "report")

DEFAULT_TEST_MU = {"burgers": (1.8, 0.0232), "convdiff": (9.5, 9.5)}

DEFAULT_MODELS = {
    "burgers": {
        "knn": "knn n_neighbors=6",
        "sindy": "sindy degree=2 threshold=0.001",
        "vkoga": "vkoga gamma=0.002 max_centers=500",
        "forest": "forest n_trees=15",
        "boosting": "boosting n_learners=40 learning_rate=0.085 max_depth=4",
        "svr2": "svr kernel=poly2 epsilon=0.0001",
        "svr3": "svr kernel=poly3 epsilon=0.00001",
        "svrrbf": "svr kernel=rbf epsilon=0.001",
    },
    "convdiff": {
        "knn": "knn n_neighbors=4",
        "sindy": "sindy degree=2 threshold=0.001",
        "vkoga": "vkoga gamma=0.05 max_centers=500",
        "forest": "forest n_trees=15",
        "boosting": "boosting n_learners=40 learning_rate=0.085 max_depth=4",
        "svr2": "svr kernel=poly2 epsilon=0.1",
        "svr3": "svr kernel=poly3 epsilon=0.1",
        "svrrbf": "svr kernel=rbf epsilon=0.001",
    },
}


def parse_model_line(line: str) -> RegressorSpec:
    """'family key=value ...' -> RegressorSpec (seed is a key like any other)."""
    parts = line.split()
    family = parts[0]
    params: dict = {}
    seed = 0
    for tok in parts[1:]:
        key, _, val = tok.partition("=")
        if key == "seed":
            seed = int(val)
            continue
        try:
            parsed = int(val)
        except ValueError:
            try:
                parsed = float(val)
            except ValueError:
                parsed = val
        params[key] = parsed
    return RegressorSpec(family, params, seed=seed)


@dataclass
class ExperimentConfig:
    problem: str
    test_mu: Tuple[float, ...]
    out_dir: Path
    seed: int = 0
    pod_energy: float = 0.9999
    pod_max_modes: int = 20
    pod_n: Optional[int] = None
    pod_center: bool = True
    n_training: int = DEFAULT_N_TRAINING
    n_validation: int = DEFAULT_N_VALIDATION
    candidate_rounds: int = DEFAULT_CANDIDATE_ROUNDS
    training_mode: str = "velocity"
    schemes: Tuple[str, ...] = ("rk4", "backward_euler")
    step_counts: Tuple[int, ...] = DEFAULT_STEP_COUNTS
    nt_override: Dict[str, int] = field(default_factory=dict)
    newton_tol: float = 1e-9
    fixed_point_tol: float = 1e-2
    max_inner: int = 50
    train_workers: int = 2
    solve_workers: int = 1
    models: Dict[str, RegressorSpec] = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in ("burgers", "convdiff"):
            raise ValueError(f"unknown problem {self.problem!r}")
        self.out_dir = Path(self.out_dir)
        system = get_problem(self.problem)
        self.test_mu = tuple(float(v) for v in self.test_mu)
        system.domain.check(np.array(self.test_mu))
        for scheme in self.schemes:
            if scheme not in ("rk4", "backward_euler"):
                raise ValueError(f"unknown scheme {scheme!r}")
        if not self.models:
            self.models = {
                name: parse_model_line(line)
                for name, line in DEFAULT_MODELS[self.problem].items()
            }
        if self.training_mode not in ("velocity", "flowmap"):
            raise ValueError("training_mode must be velocity or flowmap")


def default_config(problem: str, out_dir="runs", seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig(
        problem=problem,
        test_mu=DEFAULT_TEST_MU[problem],
        out_dir=Path(out_dir) / problem,
        seed=seed,
    )


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read the INI experiment description; overrides win over file values."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file {path} not found")
    exp = parser["experiment"]
    problem = exp.get("problem", "burgers")
    kwargs: dict = {
        "problem": problem,
        "test_mu": tuple(
            float(v)
            for v in exp.get(
                "test_mu", " ".join(str(v) for v in DEFAULT_TEST_MU[problem])
            ).split()
        ),
        "out_dir": Path(exp.get("output", f"runs/{problem}")),
        "seed": exp.getint("seed", 0),
    }
    if parser.has_section("pod"):
        pod = parser["pod"]
        kwargs["pod_energy"] = pod.getfloat("energy", 0.9999)
        kwargs["pod_max_modes"] = pod.getint("max_modes", 20)
        kwargs["pod_center"] = pod.getboolean("center", True)
        if pod.get("n", None) is not None:
            kwargs["pod_n"] = pod.getint("n")
    if parser.has_section("sampling"):
        s = parser["sampling"]
        kwargs["n_training"] = s.getint("n_training", DEFAULT_N_TRAINING)
        kwargs["n_validation"] = s.getint("n_validation", DEFAULT_N_VALIDATION)
        kwargs["candidate_rounds"] = s.getint("candidate_rounds", DEFAULT_CANDIDATE_ROUNDS)
        kwargs["training_mode"] = s.get("mode", "velocity")
    if parser.has_section("integration"):
        g = parser["integration"]
        kwargs["schemes"] = tuple(g.get("schemes", "rk4 backward_euler").split())
        kwargs["step_counts"] = tuple(
            int(v) for v in g.get(
                "step_counts", " ".join(str(c) for c in DEFAULT_STEP_COUNTS)
            ).split()
        )
        kwargs["newton_tol"] = g.getfloat("newton_tol", 1e-9)
        kwargs["fixed_point_tol"] = g.getfloat("fixed_point_tol", 1e-2)
        kwargs["max_inner"] = g.getint("max_inner", 50)
        overrides_nt = {}
        if g.get("nt_rk4", None) is not None:
            overrides_nt["rk4"] = g.getint("nt_rk4")
        if g.get("nt_backward_euler", None) is not None:
            overrides_nt["backward_euler"] = g.getint("nt_backward_euler")
        kwargs["nt_override"] = overrides_nt
    if parser.has_section("pipeline"):
        p = parser["pipeline"]
        kwargs["train_workers"] = p.getint("train_workers", 2)
        kwargs["solve_workers"] = p.getint("solve_workers", 1)
    if parser.has_section("models"):
        kwargs["models"] = {
            name: parse_model_line(line) for name, line in parser["models"].items()
        }
    kwargs.update(overrides or {})
    return ExperimentConfig(**kwargs)


class Artifacts:
    """Path bookkeeping plus manifest/timing accumulation for one run dir."""

    def __init__(self, out_dir: Path):
        self.root = Path(out_dir)
        for sub in ("snapshots", "basis", "training", "models", "trajectories", "reports"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    def path(self, *parts) -> Path:
        return self.root.joinpath(*parts)

    def require(self, relpath: str, needed_by: str, produced_by: str) -> Path:
        p = self.root / relpath
        if not p.exists():
            raise StageError(
                f"stage {needed_by} needs {relpath}; run the {produced_by} stage first"
            )
        return p

    def update_keyvalues(self, name: str, updates: dict) -> None:
        p = self.root / "reports" / name
        current = io.read_keyvalues(p) if p.exists() else {}
        current.update({k: str(v) for k, v in updates.items()})
        io.write_keyvalues(p, current)

    def manifest(self) -> dict:
        p = self.root / "reports" / "manifest.txt"
        return io.read_keyvalues(p) if p.exists() else {}

    def record(self, **updates) -> None:
        self.update_keyvalues("manifest.txt", updates)

    def record_timing(self, **updates) -> None:
        self.update_keyvalues("timings.txt", updates)

    def save_trajectory(self, name: str, result: TrajectoryResult) -> None:
        io.write_matrix(self.path("trajectories", f"{name}.txt"), result.states)
        io.write_keyvalues(
            self.path("trajectories", f"{name}.meta"),
            {
                "t0": io.format_double(result.times[0]),
                "t_final": io.format_double(result.times[-1]),
                "num_steps": result.times.size - 1,
                "scheme": result.scheme,
                "inner": result.inner or "",
            },
        )
        self.record_timing(**{f"wall_{name}": io.format_double(result.wall_time)})

    def load_trajectory(self, name: str, needed_by: str, produced_by: str) -> TrajectoryResult:
        self.require(f"trajectories/{name}.txt", needed_by, produced_by)
        states = io.read_matrix(self.path("trajectories", f"{name}.txt"))
        meta = io.read_keyvalues(self.path("trajectories", f"{name}.meta"))
        grid = TimeGrid(float(meta["t0"]), float(meta["t_final"]), int(meta["num_steps"]))
        wall = self.load_wall(name)
        return TrajectoryResult(
            grid.times(), states, wall, meta["scheme"], meta["inner"] or None
        )

    def load_wall(self, name: str) -> float:
        p = self.root / "reports" / "timings.txt"
        if p.exists():
            timings = io.read_keyvalues(p)
            if f"wall_{name}" in timings:
                return float(timings[f"wall_{name}"])
        return float("nan")


def _selected_counts(cfg: ExperimentConfig, art: Artifacts, needed_by: str) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    manifest = art.manifest()
    for scheme in cfg.schemes:
        if scheme in cfg.nt_override:
            counts[scheme] = cfg.nt_override[scheme]
            continue
        key = f"selected_nt_{scheme}"
        if key not in manifest:
            raise StageError(
                f"stage {needed_by} needs the selected step count for {scheme}; "
                f"run the verify-dt stage first or set nt_{scheme} in the config"
            )
        counts[scheme] = int(manifest[key])
    if "backward_euler" not in counts:
        # snapshot generation always uses the implicit reference solver
        if "backward_euler" in cfg.nt_override:
            counts["backward_euler"] = cfg.nt_override["backward_euler"]
        else:
            key = "selected_nt_backward_euler"
            manifest = art.manifest()
            if key not in manifest:
                raise StageError(
                    f"stage {needed_by} needs a backward_euler step count for snapshots; "
                    "run verify-dt with backward_euler or set nt_backward_euler"
                )
            counts["backward_euler"] = int(manifest[key])
    return counts


def _integrator_for(cfg: ExperimentConfig, scheme: str, differentiable: bool) -> IntegratorSpec:
    if scheme == "rk4":
        return IntegratorSpec("rk4")
    if differentiable:
        return IntegratorSpec("backward_euler", "newton", cfg.newton_tol, cfg.max_inner)
    return IntegratorSpec(
        "backward_euler", "fixed_point", cfg.fixed_point_tol, cfg.max_inner
    )


# ---------------------------------------------------------------- stages


def stage_verify_dt(cfg: ExperimentConfig, art: Artifacts) -> None:
    system = get_problem(cfg.problem)
    for scheme in cfg.schemes:
        study = verify_timestep(
            system,
            scheme,
            np.array(cfg.test_mu),
            counts=cfg.step_counts,
            inner="newton",
            tol=cfg.newton_tol,
            max_inner=cfg.max_inner,
        )
        study.to_csv(art.path("reports", f"convergence_{scheme}.csv"))
        if study.selected_nt is None:
            raise StageError(
                f"stage verify-dt: no step count reached the nominal order for {scheme}"
            )
        art.record(
            **{
                f"selected_nt_{scheme}": study.selected_nt,
                f"selected_order_{scheme}": io.format_double(study.selected_order),
                f"study_reliable_{scheme}": int(study.reliable),
            }
        )


def stage_fom_solve(cfg: ExperimentConfig, art: Artifacts) -> None:
    system = get_problem(cfg.problem)
    counts = _selected_counts(cfg, art, "fom-solve")
    nt_be = counts["backward_euler"]
    be_spec = IntegratorSpec("backward_euler", "newton", cfg.newton_tol, cfg.max_inner)

    corners = system.domain.corners()
    for i, mu in enumerate(corners):
        result = integrate(system, system.time_grid(nt_be), mu, be_spec)
        io.write_matrix(art.path("snapshots", f"corner_{i}.txt"), result.states)
        io.write_keyvalues(
            art.path("snapshots", f"corner_{i}.meta"),
            {"mu": " ".join(io.format_double(v) for v in mu), "num_steps": nt_be},
        )
    art.record(n_corner_runs=len(corners), snapshot_nt=nt_be)

    mu = np.array(cfg.test_mu)
    for scheme in cfg.schemes:
        spec = (
            IntegratorSpec("rk4")
            if scheme == "rk4"
            else be_spec
        )
        result = integrate(system, system.time_grid(counts[scheme]), mu, spec)
        art.save_trajectory(f"fom_{scheme}", result)


def stage_pod(cfg: ExperimentConfig, art: Artifacts) -> None:
    art.require("snapshots/corner_0.txt", "pod", "fom-solve")
    parts = []
    i = 0
    while art.path("snapshots", f"corner_{i}.txt").exists():
        data = io.read_matrix(art.path("snapshots", f"corner_{i}.txt"))
        meta = io.read_keyvalues(art.path("snapshots", f"corner_{i}.meta"))
        mu = np.array(meta["mu"].split(), dtype=float)
        nt = int(meta["num_steps"])
        times = np.linspace(0.0, get_problem(cfg.problem).t_final, nt + 1)
        parts.append(
            SnapshotMatrix(
                data, [f"corner_{i}"] * (nt + 1), times, np.tile(mu, (nt + 1, 1))
            )
        )
        i += 1
    snapshots = SnapshotMatrix.concatenate(parts)
    if cfg.pod_n is not None:
        basis = pod_fit(
            snapshots, n=cfg.pod_n, max_modes=cfg.pod_max_modes, center=cfg.pod_center
        )
    else:
        basis = pod_fit(
            snapshots,
            energy=cfg.pod_energy,
            max_modes=cfg.pod_max_modes,
            center=cfg.pod_center,
        )
    basis.save(
        art.path("basis", "V.txt"),
        art.path("basis", "meta.txt"),
        {
            "energy": io.format_double(cfg.pod_energy) if cfg.pod_n is None else "",
            "source_runs": " ".join(f"corner_{j}" for j in range(i)),
        },
    )
    art.record(pod_n=basis.n)


def _load_basis(art: Artifacts, needed_by: str) -> ReducedBasis:
    art.require("basis/V.txt", needed_by, "pod")
    return ReducedBasis.load(art.path("basis", "V.txt"), art.path("basis", "meta.txt"))


def stage_sample(cfg: ExperimentConfig, art: Artifacts) -> None:
    system = get_problem(cfg.problem)
    basis = _load_basis(art, "sample")
    rom = GalerkinROM(system, basis)

    blocks = []
    i = 0
    while art.path("snapshots", f"corner_{i}.txt").exists():
        blocks.append(io.read_matrix(art.path("snapshots", f"corner_{i}.txt")))
        i += 1
    if not blocks:
        raise StageError("stage sample needs snapshots/corner_0.txt; run fom-solve first")
    state_lo, state_hi = reduced_state_box(basis, np.hstack(blocks))
    lows, highs = joint_box(state_lo, state_hi, system.t_final, system.domain)

    dt = None
    if cfg.training_mode == "flowmap":
        counts = _selected_counts(cfg, art, "sample")
        dt = system.t_final / counts["backward_euler"]

    for tag, count, seed in (
        ("train", cfg.n_training, cfg.seed),
        ("valid", cfg.n_validation, cfg.seed + 1),
    ):
        points = lhs_maximin(
            LhsConfig(count, lows, highs, cfg.candidate_rounds, seed)
        )
        data = build_training_set(rom, points, lows, highs, cfg.training_mode, dt)
        data.save(
            art.path("training", f"{tag}.csv"), art.path("training", f"{tag}.meta")
        )
    art.record(
        n_training=cfg.n_training,
        n_validation=cfg.n_validation,
        sampling_seed=cfg.seed,
        training_mode=cfg.training_mode,
    )


def _load_datasets(art: Artifacts, needed_by: str):
    art.require("training/train.csv", needed_by, "sample")
    train = TrainingSet.load(
        art.path("training", "train.csv"), art.path("training", "train.meta")
    )
    valid = TrainingSet.load(
        art.path("training", "valid.csv"), art.path("training", "valid.meta")
    )
    return train, valid


def stage_train(cfg: ExperimentConfig, art: Artifacts) -> None:
    import time as _time

    train, _ = _load_datasets(art, "train")

    def fit_one(item):
        name, spec = item
        tic = _time.perf_counter()
        model = fit_regressor(spec, train)
        return name, model, _time.perf_counter() - tic

    items = list(cfg.models.items())
    if cfg.train_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.train_workers) as pool:
            fitted = list(pool.map(fit_one, items))
    else:
        fitted = [fit_one(item) for item in items]
    for name, model, seconds in fitted:
        save_model(model, art.path("models", f"{name}.txt"))
        art.record_timing(**{f"fit_{name}": io.format_double(seconds)})
    art.record(trained_models=" ".join(name for name, _ in items))


def stage_rom_solve(cfg: ExperimentConfig, art: Artifacts) -> None:
    if cfg.training_mode != "velocity":
        raise StageError(
            "stage rom-solve integrates velocity surrogates; flow-map models "
            "are rolled out through the surrogate module API instead"
        )
    system = get_problem(cfg.problem)
    basis = _load_basis(art, "rom-solve")
    counts = _selected_counts(cfg, art, "rom-solve")
    rom = GalerkinROM(system, basis)
    mu = np.array(cfg.test_mu)

    art.require("training/train.csv", "rom-solve", "sample")
    model_names = sorted(cfg.models)
    models = {}
    for name in model_names:
        art.require(f"models/{name}.txt", "rom-solve", "train")
        models[name] = load_model(art.path("models", f"{name}.txt"))

    jobs = []
    for scheme in cfg.schemes:
        grid = system.time_grid(counts[scheme])
        jobs.append((f"galerkin_{scheme}", rom, grid, _integrator_for(cfg, scheme, True)))
        for name in model_names:
            surrogate = RegressionROM(system, basis, models[name], label=name)
            jobs.append(
                (
                    f"{name}_{scheme}",
                    surrogate,
                    grid,
                    _integrator_for(cfg, scheme, surrogate.differentiable),
                )
            )

    def solve_one(job):
        tag, model, grid, spec = job
        result = integrate(model, grid, mu, spec)
        return tag, model, result

    if cfg.solve_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.solve_workers) as pool:
            results = list(pool.map(solve_one, jobs))
    else:
        results = [solve_one(job) for job in jobs]

    for tag, model, result in results:
        art.save_trajectory(tag, result)
        if isinstance(model, RegressionROM):
            art.record(
                **{
                    f"extrapolation_fraction_{tag}": io.format_double(
                        model.extrapolation_fraction()
                    )
                }
            )


def stage_report(cfg: ExperimentConfig, art: Artifacts) -> None:
    system = get_problem(cfg.problem)
    basis = _load_basis(art, "report")
    model_names = sorted(cfg.models)
    train, valid = _load_datasets(art, "report")
    mu = np.array(cfg.test_mu)

    for scheme in cfg.schemes:
        fom = art.load_trajectory(f"fom_{scheme}", "report", "fom-solve")
        galerkin = art.load_trajectory(f"galerkin_{scheme}", "report", "rom-solve")
        gal_series = error_series(galerkin, fom, galerkin, basis)

        rows = [
            (
                "Galerkin",
                io.format_double(galerkin.wall_time),
                io.format_double(galerkin.wall_time / fom.wall_time),
                "1",
                io.format_double(gal_series.avg_e_fom),
                "0",
                "",
            )
        ]
        points = []
        for name in model_names:
            traj = art.load_trajectory(f"{name}_{scheme}", "report", "rom-solve")
            series = error_series(traj, fom, galerkin, basis)
            series.to_csv(art.path("reports", f"errors_{name}_{scheme}.csv"))
            tau_fom, tau_rom = runtime_ratios(
                traj.wall_time, fom.wall_time, galerkin.wall_time
            )
            manifest = art.manifest()
            extrap = manifest.get(f"extrapolation_fraction_{name}_{scheme}", "")
            rows.append(
                (
                    name,
                    io.format_double(traj.wall_time),
                    io.format_double(tau_fom),
                    io.format_double(tau_rom),
                    io.format_double(series.avg_e_fom),
                    io.format_double(series.avg_e_rom),
                    extrap,
                )
            )
            points.append(ParetoPoint(name, tau_fom, series.avg_e_fom))
        io.write_csv(
            art.path("reports", f"summary_{scheme}.csv"),
            [
                "method",
                "online_seconds",
                "tau_fom",
                "tau_rom",
                "avg_e_fom",
                "avg_e_rom",
                "extrapolation_fraction",
            ],
            rows,
        )
        frontier = pareto_frontier(points)
        pareto_csv(art.path("reports", f"pareto_{scheme}.csv"), points, frontier)

        for name in model_names:
            model = load_model(art.path("models", f"{name}.txt"))
            if not model.differentiable:
                continue
            traj = art.load_trajectory(f"{name}_{scheme}", "report", "rom-solve")
            report = evaluate_bound(
                system,
                mu,
                fom,
                traj,
                basis,
                model,
                valid.inputs,
                valid.targets,
                seed=cfg.seed,
            )
            report.to_keyvalues(art.path("reports", f"bound_{name}_{scheme}.txt"))


_STAGE_FUNCS = {
    "verify-dt": stage_verify_dt,
    "fom-solve": stage_fom_solve,
    "pod": stage_pod,
    "sample": stage_sample,
    "train": stage_train,
    "rom-solve": stage_rom_solve,
    "report": stage_report,
}


def run_stage(cfg: ExperimentConfig, stage: str) -> None:
    if stage not in _STAGE_FUNCS:
        raise ValueError(f"unknown stage {stage!r}, have {list(_STAGE_FUNCS)}")
    art = Artifacts(cfg.out_dir)
    try:
        _STAGE_FUNCS[stage](cfg, art)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(f"stage {stage}: {exc}") from exc


def run_pipeline(cfg: ExperimentConfig) -> Path:
    """All stages in order; completed stages persist even if a later one fails.

    The convergence study is skipped when the config pins a step count for
    every scheme (plus the implicit snapshot solver), since nothing downstream
    would consult its selection.
    """
    stages = list(STAGES)
    pinned = set(cfg.nt_override)
    if set(cfg.schemes) | {"backward_euler"} <= pinned:
        stages.remove("verify-dt")
    for stage in stages:
        run_stage(cfg, stage)
    return Path(cfg.out_dir)
