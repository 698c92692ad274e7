"""Batch experiment front-end.

One experiment per invocation: configure a model and experiment via flags
and/or a JSON config file (flags win, unknown config keys are rejected), run
it, and emit report.json + report.csv into the output directory.  Exit status
0 means every asserted criterion passed, 2 flags criterion failures, 1 flags
usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields

COMMANDS = (
    "calibrate",
    "check",
    "jets",
    "curvature",
    "hilbert",
    "star",
    "bergman",
    "riemann",
    "lattice",
    "stochastic",
)

_TOLERANCE_KEYS = {"normalization", "hermiticity", "idempotency", "first_jet"}
_TRUNCATION_KEYS = {"p_lo", "p_hi", "q_lo", "q_hi"}


@dataclass
class ExperimentConfig:
    command: str = "check"
    model: str = "flat_pq"
    hbar: float = 1.0
    grid_n: int = 0                 # 0 selects the per-command default
    truncation: dict | None = None
    tolerances: dict | None = None
    seed: int = 1234
    output_dir: str = "."
    threads: int = 0
    deterministic: bool = False
    uncorrected_sign: bool = False
    n_probes: int = 50

    def defaulted_grid_n(self) -> int:
        if self.grid_n:
            return self.grid_n
        return 64 if self.model == "sphere" else 200


class ConfigError(ValueError):
    pass


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "tolerances" in raw and raw["tolerances"] is not None:
        bad = set(raw["tolerances"]) - _TOLERANCE_KEYS
        if bad:
            raise ConfigError(f"unknown tolerance keys: {sorted(bad)}")
    if "truncation" in raw and raw["truncation"] is not None:
        bad = set(raw["truncation"]) - _TRUNCATION_KEYS
        if bad:
            raise ConfigError(f"unknown truncation keys: {sorted(bad)}")
    return raw


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proplab", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; explicit flags override it")
    common.add_argument("--model", choices=["flat_pq", "flat_symmetric", "sphere", "hyperbolic"])
    common.add_argument("--hbar", type=float)
    common.add_argument("--grid-n", type=int, dest="grid_n")
    common.add_argument("--seed", type=int)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--threads", type=int, help="0 = auto (PROPLAB_THREADS overrides)")
    common.add_argument("--deterministic", action="store_true", default=None)
    common.add_argument("--uncorrected-sign", action="store_true", default=None,
                        dest="uncorrected_sign")
    common.add_argument("--n-probes", type=int, dest="n_probes")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    sub.add_parser("run", parents=[common], help="run the command named in --config")
    return parser


def build_config(argv) -> ExperimentConfig:
    args = _parser().parse_args(argv)
    if args.command is None:
        raise ConfigError("no command given")
    file_values = _load_config_file(args.config) if args.config else {}
    cfg = ExperimentConfig()
    for key, value in file_values.items():
        setattr(cfg, key, value)
    if args.command != "run":
        cfg.command = args.command
    elif not cfg.command or cfg.command == "run":
        raise ConfigError("'run' needs a config file with a 'command' entry")
    for f in fields(ExperimentConfig):
        if f.name in ("command", "truncation", "tolerances"):
            continue
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    if cfg.hbar <= 0:
        raise ConfigError("hbar must be positive")
    return cfg


def _apply_threads(cfg: ExperimentConfig) -> None:
    n = cfg.threads or int(os.environ.get("PROPLAB_THREADS", "0"))
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


# -- shared experiment plumbing -------------------------------------------------


def _calibrated(cfg: ExperimentConfig):
    from .axioms import probe_pairs
    from .calibration import calibrate_measure
    from .geometry import make_model
    from .grids import phase_space_grid

    model = make_model(cfg.model, cfg.hbar, sphere_paper_sign=cfg.uncorrected_sign)
    n = cfg.defaulted_grid_n()
    p_bounds = q_bounds = None
    if cfg.truncation:
        t = cfg.truncation
        if "p_lo" in t or "p_hi" in t:
            p_bounds = (t.get("p_lo"), t.get("p_hi"))
        if "q_lo" in t or "q_hi" in t:
            q_bounds = (t.get("q_lo"), t.get("q_hi"))
    grid = phase_space_grid(model, n, n, p_bounds=p_bounds, q_bounds=q_bounds)
    result = calibrate_measure(model, grid, probe_pairs(model, cfg.n_probes))
    grid = grid.with_density(result.c)
    return result.model, grid, result


def _run_calibrate(cfg, report):
    from .calibration import default_tolerance

    model, grid, result = _calibrated(cfg)
    tol = (cfg.tolerances or {}).get("idempotency", default_tolerance(model))
    report.results = {
        "measure_density": result.c,
        "residual": result.residual,
        "probe_count": result.probe_count,
        "grid_mass": grid.total_mass(),
    }
    report.add_criterion("idempotency_residual", result.residual < tol, result.residual, tol)
    report.csv_fields = ["model", "hbar", "grid_n", "measure_density", "residual"]
    report.csv_rows = [{
        "model": cfg.model, "hbar": cfg.hbar, "grid_n": cfg.defaulted_grid_n(),
        "measure_density": result.c, "residual": result.residual,
    }]


def _run_check(cfg, report):
    from .axioms import AxiomTolerances, check_axioms

    model, grid, _ = _calibrated(cfg)
    overrides = cfg.tolerances or {}
    tol = AxiomTolerances(
        normalization=overrides.get("normalization", 1e-12),
        hermiticity=overrides.get("hermiticity", 1e-12),
        idempotency=overrides.get("idempotency"),
        first_jet=overrides.get("first_jet", 1e-6),
    ).for_model(model)
    ax = check_axioms(model, grid, tol=tol, n_probes=cfg.n_probes)
    report.results = ax.as_dict()
    errs = {
        "normalization": ax.normalization_max_err,
        "hermiticity": ax.hermiticity_max_err,
        "idempotency": ax.idempotency_max_err,
        "first_jet": ax.first_jet_max_err,
    }
    tols = {
        "normalization": tol.normalization,
        "hermiticity": tol.hermiticity,
        "idempotency": tol.idempotency,
        "first_jet": tol.first_jet,
    }
    report.csv_fields = ["axiom", "max_err", "tolerance", "passed"]
    for axiom, verdict in ax.verdicts.items():
        report.add_criterion(f"axiom_{axiom}", verdict, errs[axiom], tols[axiom])
        report.csv_rows.append({
            "axiom": axiom, "max_err": errs[axiom],
            "tolerance": tols[axiom], "passed": verdict,
        })


def _run_jets(cfg, report):
    from . import vanest
    from .axioms import probe_points
    from .geometry import make_model

    model = make_model(cfg.model, cfg.hbar, sphere_paper_sign=cfg.uncorrected_sign)
    pts = probe_points(model, 20)
    tol1 = (cfg.tolerances or {}).get("first_jet", 1e-6)
    tol2 = 1e-4
    report.csv_fields = ["p", "q", "residual_first", "residual_second_diag",
                         "mixed_re", "mixed_im"]
    worst1 = worst2 = 0.0
    for pt in pts:
        rep = vanest.extract_second_jet(model, pt)
        worst1 = max(worst1, rep.residual_first)
        worst2 = max(worst2, rep.residual_second_diag)
        report.csv_rows.append({
            "p": float(pt[0]), "q": float(pt[1]),
            "residual_first": rep.residual_first,
            "residual_second_diag": rep.residual_second_diag,
            "mixed_re": rep.mixed_term.real, "mixed_im": rep.mixed_term.imag,
        })
    report.results = {"first_jet_max_err": worst1, "second_jet_diag_max_err": worst2}
    report.add_criterion("first_jet", worst1 < tol1, worst1, tol1)
    report.add_criterion("second_jet_diag", worst2 < tol2, worst2, tol2)


def _run_curvature(cfg, report):
    from . import vanest
    from .axioms import probe_points
    from .geometry import make_model

    model = make_model(cfg.model, cfg.hbar, sphere_paper_sign=cfg.uncorrected_sign)
    pts = probe_points(model, 6)
    tol = 1e-6
    report.csv_fields = ["p", "q", "curvature_re", "curvature_im", "err"]
    worst = 0.0
    for pt in pts:
        val = vanest.curvature_from_cocycle(model, pt)
        ref = model.curvature_coefficient(pt)
        err = abs(val - ref)
        worst = max(worst, err)
        report.csv_rows.append({
            "p": float(pt[0]), "q": float(pt[1]),
            "curvature_re": val.real, "curvature_im": val.imag, "err": err,
        })
    report.results = {"curvature_max_err": worst}
    report.add_criterion("curvature_matches_dtheta", worst < tol, worst, tol)


def _run_hilbert(cfg, report):
    import numpy as np

    from .axioms import probe_points
    from .hilbert import build_discrete_hilbert, coherent_state

    if cfg.model != "sphere" and cfg.grid_n == 0:
        cfg.grid_n = 48
    model, grid, _ = _calibrated(cfg)
    H = build_discrete_hilbert(model, grid)
    results = {
        "rank_phys": H.rank_phys,
        "clustering_defect": H.clustering_defect(),
        "method": H.method,
        "spectrum_top": [float(v) for v in H.spectrum[-(H.rank_phys + 3):]],
    }
    report.add_criterion("eigenvalue_clustering", H.clustering_defect() < 0.05,
                         H.clustering_defect(), 0.05)
    if cfg.model == "sphere":
        expected = model.sphere_k + 1
        report.add_criterion("rank_phys", H.rank_phys == expected, H.rank_phys, expected)
        pts = probe_points(model, 20)
        worst = 0.0
        for i in range(len(pts)):
            for j in range(i + 1, min(i + 11, len(pts))):
                ci = coherent_state(H, pts[i])
                cj = coherent_state(H, pts[j])
                worst = max(worst, abs(np.vdot(cj, ci) - model.omega(tuple(pts[i]), tuple(pts[j]))))
        results["coherent_reconstruction_max_err"] = worst
        report.add_criterion("coherent_reconstruction", worst < 1e-4, worst, 1e-4)
    report.results = results
    report.csv_fields = ["hbar", "grid_n", "rank_phys", "max_eig_defect"]
    report.csv_rows = [{
        "hbar": cfg.hbar, "grid_n": cfg.defaulted_grid_n(),
        "rank_phys": H.rank_phys, "max_eig_defect": H.clustering_defect(),
    }]


def _run_star(cfg, report):
    import numpy as np

    from .axioms import probe_pairs
    from .calibration import calibrate_measure
    from .geometry import make_model
    from .grids import phase_space_grid
    from .hilbert import build_discrete_hilbert, commutator_scaling_study

    hbars = [cfg.hbar, cfg.hbar / 2, cfg.hbar / 4]
    builds = []
    for h in hbars:
        model = make_model("flat_pq", h)
        half = 6.0 * math.sqrt(h)
        n = cfg.grid_n or 48
        grid = phase_space_grid(model, n, n, p_bounds=(-half, half), q_bounds=(-half, half))
        res = calibrate_measure(model, grid, probe_pairs(model, 8))
        builds.append(build_discrete_hilbert(res.model, grid.with_density(res.c)))
    rows = commutator_scaling_study(
        builds,
        f=lambda p, q: q,
        g=lambda p, q: p,
        poisson_fg=lambda p, q: np.ones_like(p),
    )
    bound = 2.0
    worst = max(r["defect_over_hbar"] for r in rows)
    report.results = {"rows": rows}
    report.add_criterion("commutator_defect_over_hbar_bounded", worst < bound, worst, bound)
    report.csv_fields = ["hbar", "grid_n", "rank_phys", "max_eig_defect", "commutator_defect"]
    report.csv_rows = [{k: r[k] for k in report.csv_fields} for r in rows]


def _run_bergman(cfg, report):
    from .bergman import build_cp1_bergman, check_lemma_berg

    probes = [0.0, 0.5, 1.0, 2.0, 10.0, 0.5 + 0.5j, -1.0 + 2.0j]
    report.csv_fields = ["k", "diag_variation", "lemma_defect_unperturbed",
                         "lemma_defect_perturbed"]
    for k in (1, 2, 4):
        rep = check_lemma_berg(build_cp1_bergman(k), probes)
        report.results[f"k{k}"] = rep.as_dict()
        report.add_criterion(f"diag_constancy_k{k}", rep.diag_variation < 1e-8,
                             rep.diag_variation, 1e-8)
        report.add_criterion(f"lemma_defect_unperturbed_k{k}",
                             rep.defect_unperturbed < 1e-6, rep.defect_unperturbed, 1e-6)
        report.add_criterion(f"lemma_defect_perturbed_k{k}",
                             rep.defect_perturbed > 1e-2, rep.defect_perturbed, 1e-2)
        report.csv_rows.append(rep.as_dict() | {})
    for row in report.csv_rows:
        row.pop("perturbed_scale", None)


def _run_riemann(cfg, report):
    import numpy as np

    from . import riemann as rm

    # five summand variants sharing the jet of f dx
    def variants(f, F_anti):
        return {
            "left": lambda x, y: f(x) * (y - x),
            "right": lambda x, y: f(y) * (y - x),
            "midpoint": lambda x, y: f((x + y) / 2) * (y - x),
            "trapezoid": lambda x, y: 0.5 * (f(x) + f(y)) * (y - x),
            "telescoping": lambda x, y: F_anti(y) - F_anti(x),
        }

    integrands = [
        ("x^2", lambda x: x**2, lambda x: x**3 / 3),
        ("sin", np.sin, lambda x: -np.cos(x)),
        ("exp", np.exp, np.exp),
    ]
    report.csv_fields = ["case", "value", "error"]
    worst_pair = 0.0
    for name, f, F_anti in integrands:
        limits = {}
        for label, ev in variants(f, F_anti).items():
            F = rm.make_summand_1d(ev, f, (0.0, 1.0), label=f"{label}:{name}")
            limits[label] = rm.estimate_limit(F, (0.0, 1.0), 10_000)
        vals = list(limits.values())
        spread = max(abs(a - b) for a in vals for b in vals)
        worst_pair = max(worst_pair, spread)
        report.csv_rows.append({"case": f"variants:{name}", "value": vals[0].real,
                                "error": spread})
    report.add_criterion("variant_limits_agree", worst_pair < 1e-6, worst_pair, 1e-6)

    tele = rm.make_summand_1d(lambda x, y: np.sin(y) - np.sin(x), np.cos, (0.0, 1.0))
    part = rm.interval_partition(0.0, 1.0, 137)
    tele_err = abs(rm.riemann_sum_1d(tele, part) - math.sin(1.0))
    report.add_criterion("telescoping_exact", tele_err < 1e-14, tele_err, 1e-14)
    report.csv_rows.append({"case": "telescoping", "value": math.sin(1.0), "error": tele_err})

    area = rm.make_summand_twoform(
        lambda a, b, c: 0.5 * ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                               - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])),
        lambda x: 1.0,
    )
    tri = rm.disk_triangulation()
    for _ in range(4):
        tri = tri.subdivide()
    disk_err = abs(rm.simplicial_riemann_sum(area, tri) - math.pi)
    report.add_criterion("disk_area_pi", disk_err < 2e-2, disk_err, 2e-2)
    report.csv_rows.append({"case": "disk_area", "value": math.pi, "error": disk_err})

    Fdx = rm.make_summand_1d(lambda x, y: y - x, lambda x: 1.0, (0.0, 1.5))
    sub = rm.pullback_summand(Fdx, lambda t: t**2, (0.0, 1.0))
    sub_err = abs(rm.estimate_limit(sub, (0.0, 1.0), 4000) - 1.0)
    report.add_criterion("pullback_substitution", sub_err < 1e-3, sub_err, 1e-3)
    report.csv_rows.append({"case": "pullback_substitution", "value": 1.0, "error": sub_err})

    xdy = rm.make_summand_oneform(
        lambda u, v: u[..., 0] * (v[..., 1] - u[..., 1]),
        lambda x: (0.0, x[0]),
        box=(-1.5, 1.5),
    )
    circle = rm.pullback_curve_summand(
        xdy, lambda t: np.array([math.cos(t), math.sin(t)]), (0.0, 2 * math.pi)
    )
    green_err = abs(rm.estimate_limit(circle, (0.0, 2 * math.pi), 4000) - math.pi)
    report.add_criterion("pullback_green", green_err < 1e-3, green_err, 1e-3)
    report.csv_rows.append({"case": "pullback_green", "value": math.pi, "error": green_err})
    report.results = {"worst_variant_spread": worst_pair, "disk_area_error": disk_err}


def _run_lattice(cfg, report):
    import numpy as np

    from .axioms import probe_pairs
    from .calibration import calibrate_measure
    from .geometry import make_model
    from .grids import phase_space_grid
    from .lattice import convolve_n, lattice_kernel

    report.csv_fields = ["model", "n", "p0", "q0", "p1", "q1", "abs_error"]

    # flat fixed point: F equals the exact kernel, so every n reproduces it
    flat = make_model("flat_pq", cfg.hbar)
    n_flat = 48
    gf = phase_space_grid(flat, n_flat, n_flat)
    res = calibrate_measure(flat, gf, probe_pairs(flat, 8))
    flat, gf = res.model, gf.with_density(res.c)
    quad_tol = max(res.residual, 1e-12)
    Lf = lattice_kernel(flat)
    pairs = probe_pairs(flat, 5)
    worst_flat = 0.0
    for n in (1, 2, 4):
        for x, y in pairs:
            err = abs(convolve_n(Lf, n, gf, (x, y)) - flat.omega(tuple(x), tuple(y)))
            worst_flat = max(worst_flat, err)
            report.csv_rows.append({
                "model": "flat_pq", "n": n, "p0": float(x[0]), "q0": float(x[1]),
                "p1": float(y[0]), "q1": float(y[1]), "abs_error": err,
            })
    report.add_criterion("flat_fixed_point", worst_flat < 5 * quad_tol, worst_flat, 5 * quad_tol)

    # sphere: normalized chains approach the exact kernel as n grows
    sph = make_model("sphere", 0.5)
    gs = phase_space_grid(sph, 96, 96)
    res = calibrate_measure(sph, gs, probe_pairs(sph, 8))
    sph, gs = res.model, gs.with_density(res.c)
    Ls = lattice_kernel(sph)
    rh = math.sqrt(sph.hbar)
    x = np.array([0.0, 0.0])
    ang = 0.3 / sph.sphere_radius()
    y = np.array([rh * math.cos(math.pi / 2 - ang), 0.0])
    errors = []
    for n in (1, 2, 4, 8):
        err = abs(convolve_n(Ls, n, gs, (x, y)) - sph.omega(tuple(x), tuple(y)))
        errors.append(err)
        report.csv_rows.append({
            "model": "sphere", "n": n, "p0": float(x[0]), "q0": float(x[1]),
            "p1": float(y[0]), "q1": float(y[1]), "abs_error": err,
        })
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    report.add_criterion("sphere_error_decreasing", decreasing, errors[-1], errors[0])
    report.results = {"flat_worst": worst_flat, "sphere_errors": errors}


def _run_stochastic(cfg, report):
    import numpy as np

    from .stochastic import generate_ensemble, stratonovich_ito_gap

    levels = [2**k for k in range(6, 13)]
    n_paths = 10_000
    report.csv_fields = ["n_steps", "n_paths", "f_name", "l2_gap", "ci95"]
    gaps = []
    for n_steps in levels:
        E = generate_ensemble(n_paths, n_steps, cfg.seed)
        st = stratonovich_ito_gap(E, np.sin, np.cos)
        gaps.append(st.l2_gap)
        report.csv_rows.append({
            "n_steps": n_steps, "n_paths": n_paths, "f_name": "sin",
            "l2_gap": st.l2_gap, "ci95": st.ci95,
        })
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    report.add_criterion("l2_gap_decreasing", decreasing, gaps[-1], gaps[0])
    report.add_criterion("final_gap", gaps[-1] < 0.02, gaps[-1], 0.02)

    E = generate_ensemble(200, 256, cfg.seed)
    g = E.paths()
    D = np.sum((g[:, :-1] + 0.5 * E.increments) * E.increments, axis=1)
    qv = np.sum(E.increments**2, axis=1)
    ident = float(np.max(np.abs(D - np.sum(g[:, :-1] * E.increments, axis=1) - 0.5 * qv)))
    report.add_criterion("linear_identity_half_qv", ident < 1e-12, ident, 1e-12)
    report.results = {"gaps": gaps, "identity_defect": ident}


_RUNNERS = {
    "calibrate": _run_calibrate,
    "check": _run_check,
    "jets": _run_jets,
    "curvature": _run_curvature,
    "hilbert": _run_hilbert,
    "star": _run_star,
    "bergman": _run_bergman,
    "riemann": _run_riemann,
    "lattice": _run_lattice,
    "stochastic": _run_stochastic,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment and write its reports; returns the exit status."""
    from .reports import Report, write_report

    _apply_threads(cfg)
    report = Report(command=cfg.command, config=asdict(cfg), seed=cfg.seed)
    t0 = time.perf_counter()
    _RUNNERS[cfg.command](cfg, report)
    report.wall_time_s = time.perf_counter() - t0
    write_report(report, cfg.output_dir)
    return 0 if report.passed else 2


def main(argv=None) -> int:
    try:
        cfg = build_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"proplab: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; remap to the config-error status
        return 1 if exc.code not in (0, None) else 0
    try:
        return run(cfg)
    except Exception as exc:  # surfaced as a config/usage problem, not a crash
        print(f"proplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
