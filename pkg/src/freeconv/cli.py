"""Command-line runner: seed-pinned experiments driven by JSON configs.

Subcommands: law, transform, add, mul, sample, verify, selftest.  Exit
codes: 0 success, 1 invalid config or parameters, 2 a verification
tolerance failed, 3 a numerical pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .acceptance import run_all
from .arithmetic import (
    ExternalFieldSpec,
    free_add,
    free_multiply,
    h_function,
    pastur_add_gaussian,
    r_transform,
    verify_generalized_addition_gaussian,
)
from .errors import NumericalError, ValidationError
from .measures import (
    LawSpec,
    MomentVector,
    density_l1_distance,
    make_law,
    wasserstein1_empirical,
    write_density_csv,
)
from .report import CriterionRecord, ReportDocument
from .rmt import (
    EnsembleSpec,
    mc_external_field,
    mc_free_add_experiment,
    mc_free_mul_experiment,
)
from .series import free_add_series, free_multiply_series
from .stieltjes import (
    ContourSpec,
    cauchy_transform,
    principal_value_transform,
)


def law_from_config(cfg) -> LawSpec:
    kind = cfg["kind"]
    params = cfg.get("params", [])
    if kind == "atom_list":
        return LawSpec.atom_list([tuple(p) for p in params])
    ctor = getattr(LawSpec, kind, None)
    if ctor is None:
        raise ValidationError(f"unknown law kind {kind!r}")
    return ctor(*params)


def measure_from_config(cfg, grid_points=2000):
    return make_law(law_from_config(cfg), cfg.get("grid_points", grid_points))


def contour_from_config(cfg) -> ContourSpec | None:
    if cfg is None:
        return None
    grid = np.linspace(cfg["lo"], cfg["hi"], cfg.get("points", 2000))
    schedule = np.asarray(cfg.get("epsilon_schedule",
                                  (1e-2, 5e-3, 2.5e-3)), dtype=float)
    return ContourSpec(grid, schedule)


def ensemble_from_config(cfg, base_seed) -> EnsembleSpec:
    kind = cfg["kind"]
    n = cfg["dimension"]
    seed = cfg.get("base_seed", base_seed)
    if kind == "gue":
        return EnsembleSpec.gue(cfg.get("sigma", 1.0), n, seed)
    if kind == "wishart":
        return EnsembleSpec.wishart(cfg.get("ratio", 1.0), n, seed)
    if kind == "fixed_spectrum":
        return EnsembleSpec.fixed_spectrum(measure_from_config(cfg["measure"]),
                                           n, seed)
    if kind == "shifted_gue":
        field = ExternalFieldSpec(measure_from_config(cfg["field"]))
        return EnsembleSpec.shifted_gue(cfg.get("sigma", 1.0), field, n, seed)
    raise ValidationError(f"unknown ensemble kind {kind!r}")


def _write_measure(mu, out_dir, stem):
    csv_path = out_dir / f"{stem}.csv"
    sidecar = out_dir / f"{stem}.atoms.json"
    write_density_csv(mu, csv_path, sidecar)
    return csv_path


def _write_report(report: ReportDocument, out_dir, stem="report"):
    path = out_dir / f"{stem}.json"
    path.write_text(report.to_json() + "\n")
    return path


def cmd_law(cfg, out_dir, seed, tol_scale):
    mu = measure_from_config(cfg["law"])
    _write_measure(mu, out_dir, cfg.get("output", "density"))
    return 0


def cmd_transform(cfg, out_dir, seed, tol_scale):
    mu = measure_from_config(cfg["law"])
    which = cfg["transform"]
    grid_cfg = cfg["grid"]
    xs = np.linspace(grid_cfg["lo"], grid_cfg["hi"],
                     grid_cfg.get("points", 200))
    offset = cfg.get("imag_offset", 1e-2)
    rows = []
    for x in xs:
        if which == "cauchy":
            val = cauchy_transform(mu, complex(x, offset))
        elif which == "pv":
            val = complex(principal_value_transform(mu, float(x)))
        elif which == "r":
            val = r_transform(mu, complex(x, -offset))
        elif which == "h":
            val = h_function(mu, complex(x, offset))
        else:
            raise ValidationError(f"unknown transform {which!r}")
        rows.append((x, val.real, val.imag))
    path = out_dir / f"transform_{which}.csv"
    with open(path, "w") as fh:
        fh.write("x,re,im\n")
        for x, re, im in rows:
            fh.write(f"{x:.17g},{re:.17g},{im:.17g}\n")
    return 0


def cmd_add(cfg, out_dir, seed, tol_scale):
    mu1 = measure_from_config(cfg["law1"])
    mu2 = measure_from_config(cfg["law2"])
    out = free_add(mu1, mu2, contour_from_config(cfg.get("contour")))
    _write_measure(out, out_dir, "sum_density")
    if cfg.get("pastur_cross_check"):
        sigma = cfg["pastur_sigma"]
        alt = pastur_add_gaussian(mu1, sigma,
                                  contour_from_config(cfg.get("contour")))
        l1 = density_l1_distance(out, alt)
        crit = CriterionRecord("pastur_cross_check_l1", l1,
                               1e-2 * tol_scale)
        report = ReportDocument(
            experiment_id="add_with_pastur_cross_check",
            inputs={"config": cfg}, metrics={"l1": l1}, criteria=(crit,),
            seed=seed,
        )
        _write_report(report, out_dir)
        if not report.passed:
            return 2
    return 0


def cmd_mul(cfg, out_dir, seed, tol_scale):
    mu1 = measure_from_config(cfg["law1"])
    mu2 = measure_from_config(cfg["law2"])
    out = free_multiply(mu1, mu2, contour_from_config(cfg.get("contour")))
    _write_measure(out, out_dir, "product_density")
    return 0


def cmd_sample(cfg, out_dir, seed, tol_scale):
    trials = cfg.get("trials", 20)
    spec1 = ensemble_from_config(cfg["ensemble1"], seed)
    if cfg.get("experiment", "add") == "mul":
        spec2 = ensemble_from_config(cfg["ensemble2"], seed)
        es = mc_free_mul_experiment(spec1, spec2, trials)
    elif "ensemble2" in cfg:
        spec2 = ensemble_from_config(cfg["ensemble2"], seed)
        es = mc_free_add_experiment(spec1, spec2, trials)
    else:
        from .eigen import hermitian_eigenvalues
        from .rmt import sample_ensemble

        rows = [hermitian_eigenvalues(sample_ensemble(spec1, t))
                for t in range(trials)]
        from .rmt import EmpiricalSpectrum

        es = EmpiricalSpectrum(np.asarray(rows))
    es.to_csv(out_dir / "spectrum.csv")
    return 0


def _tolerance(cfg, name, default, tol_scale):
    return cfg.get("tolerances", {}).get(name, default) * tol_scale


def cmd_verify(cfg, out_dir, seed, tol_scale):
    mode = cfg.get("mode", "add")
    t0 = time.perf_counter()
    criteria = []
    metrics = {}
    if mode in ("add", "mul"):
        mu1 = measure_from_config(cfg["law1"])
        mu2 = measure_from_config(cfg["law2"])
        order = cfg.get("order", 8)
        mv1 = MomentVector.from_measure(mu1, order)
        mv2 = MomentVector.from_measure(mu2, order)
        if mode == "add":
            out = free_add(mu1, mu2, contour_from_config(cfg.get("contour")))
            expected = free_add_series(mv1, mv2)
        else:
            out = free_multiply(mu1, mu2,
                                contour_from_config(cfg.get("contour")))
            expected = free_multiply_series(mv1, mv2)
        got = MomentVector.from_measure(out, order)
        rel = float(np.max(np.abs(got.m - expected.m)
                           / np.maximum(1.0, np.abs(expected.m))))
        metrics["moment_rel_error"] = rel
        criteria.append(CriterionRecord(
            "moment_rel_error", rel,
            _tolerance(cfg, "moment_rel_error", 1e-2, tol_scale)))
        trials = cfg.get("trials", 10)
        dim = cfg.get("dimension", 512)
        e1 = EnsembleSpec.fixed_spectrum(mu1, dim, seed)
        e2 = EnsembleSpec.fixed_spectrum(mu2, dim, seed + 1)
        es = (mc_free_add_experiment(e1, e2, trials) if mode == "add"
              else mc_free_mul_experiment(e1, e2, trials))
        w1 = wasserstein1_empirical(es.pooled(), out)
        metrics["w1_vs_monte_carlo"] = w1
        criteria.append(CriterionRecord(
            "w1_vs_monte_carlo", w1,
            _tolerance(cfg, "w1_vs_monte_carlo", 0.05, tol_scale)))
        _write_measure(out, out_dir, f"{mode}_density")
    elif mode == "pastur":
        mu = measure_from_config(cfg["law"])
        sigma = cfg.get("sigma", 1.0)
        semi = make_law(LawSpec.semicircle(sigma), 2000)
        a = pastur_add_gaussian(mu, sigma,
                                contour_from_config(cfg.get("contour")))
        b = free_add(mu, semi, contour_from_config(cfg.get("contour")))
        l1 = density_l1_distance(a, b)
        metrics["l1_vs_free_add"] = l1
        criteria.append(CriterionRecord(
            "l1_vs_free_add", l1,
            _tolerance(cfg, "l1_vs_free_add", 1e-2, tol_scale)))
        _write_measure(a, out_dir, "pastur_density")
    elif mode == "external_field":
        field = ExternalFieldSpec(measure_from_config(cfg["field"]))
        sigma1 = cfg.get("sigma1", 1.0)
        sigma2 = cfg.get("sigma2", 1.0)
        lo, hi = field.measure.support()
        rng = np.random.default_rng(seed)
        probes = rng.uniform(hi + 0.5, hi + 3.0, cfg.get("probes", 50))
        rep = verify_generalized_addition_gaussian(sigma1, sigma2, field,
                                                   probes)
        metrics.update(
            {"max_analytic_residual": rep.metrics["max_residual"]})
        criteria.append(CriterionRecord(
            "max_analytic_residual", rep.metrics["max_residual"],
            _tolerance(cfg, "max_analytic_residual", 1e-12, tol_scale)))
        mc = mc_external_field(sigma1, field, cfg.get("dimension", 128),
                               cfg.get("trials", 400), seed)
        metrics["mc_fraction_within_3_stderr"] = \
            mc.metrics["fraction_within_3_stderr"]
        criteria.append(CriterionRecord(
            "mc_fraction_within_3_stderr",
            mc.metrics["fraction_within_3_stderr"], 0.95, comparator=">="))
    else:
        raise ValidationError(f"unknown verify mode {mode!r}")
    report = ReportDocument(
        experiment_id=f"verify_{mode}",
        inputs={"config": cfg},
        metrics=metrics,
        criteria=tuple(criteria),
        wall_time_s=time.perf_counter() - t0,
        seed=seed,
    )
    _write_report(report, out_dir)
    print(f"verify {mode}: {'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 2


def cmd_selftest(cfg, out_dir, seed, tol_scale):
    reports = run_all(seed=seed, tolerance_scale=tol_scale)
    combined = {
        "experiment_id": "selftest",
        "reports": [r.as_dict() for r in reports],
        "verdict": "pass" if all(r.passed for r in reports) else "fail",
    }
    (out_dir / "selftest_report.json").write_text(
        json.dumps(combined, indent=1) + "\n")
    return 0 if all(r.passed for r in reports) else 2


COMMANDS = {
    "law": cmd_law,
    "transform": cmd_transform,
    "add": cmd_add,
    "mul": cmd_mul,
    "sample": cmd_sample,
    "verify": cmd_verify,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="freeconv",
        description="Free-probability spectral arithmetic and verification",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path,
                        help="JSON experiment config (optional for selftest)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config base seed")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="output directory")
    parser.add_argument("--tolerance-scale", type=float, default=1.0,
                        help="multiply every verification tolerance")
    args = parser.parse_args(argv)

    try:
        cfg = {}
        if args.config is not None:
            cfg = json.loads(args.config.read_text())
        seed = args.seed if args.seed is not None \
            else cfg.get("base_seed", 11)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, seed,
                                      args.tolerance_scale)
    except (ValidationError, KeyError, json.JSONDecodeError) as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return 1
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
