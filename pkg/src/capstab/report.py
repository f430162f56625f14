"""Pipelines behind the command line: analyze, verify and sweep, plus report writers."""

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import identities as ids
from . import spaceform as sf
from .discretize import assemble, evaluate_Q
from .errors import CapstabError
from .mesh import read_mesh
from .spectrum import analyze_spectrum, index_bracket
from .surface import Immersion, SurfaceFamily, boundary_frame, build_family, euler_data
from .topology import bound_violations, index_bounds, topology_report

SCHEMA_VERSION = "1"
log = logging.getLogger("capstab")


@dataclass
class Analysis:
    report: dict
    surface: object = None
    assembly: object = None
    spectrum: object = None
    arrays: dict = field(default_factory=dict)


def build_surface(cfg):
    ball = sf.AmbientBall.from_config(cfg["ambient"])
    srf = cfg["surface"]
    if "mesh" in srf:
        return Immersion(ball, None, read_mesh(cfg.mesh_path))
    fam = SurfaceFamily.make(srf["family"], **srf["params"])
    return build_family(fam, ball, level=cfg["mesh_level"])


def analyze(cfg):
    """Surface, frame, assembly, spectrum, verdict and topology for one configuration."""
    surface = build_surface(cfg)
    log.info("analyzing %s (%d vertices)", surface.label, surface.mesh.n_vertices)
    frame = boundary_frame(surface)
    A = assemble(surface)
    sp_cfg, tol = cfg["spectrum"], cfg["tolerances"]
    spec = analyze_spectrum(A, count=sp_cfg["count"], n_constrained=sp_cfg["n_constrained"],
                            dense_max=sp_cfg["dense_max"], eps_rel=tol["eps_rel"],
                            guard_factor=tol["guard_factor"])
    br = index_bracket(spec)
    topo = topology_report(surface.mesh)
    preds = index_bounds(topo, surface.ball, cfg["topology"]["embedding_dim"])
    ed = euler_data(surface)
    Am = A.A
    witness_direct = evaluate_Q(A, spec.witness, spec.witness)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "analyze",
        "config": cfg.to_dict(),
        "surface": {
            "label": surface.label,
            "n_vertices": int(surface.mesh.n_vertices),
            "n_faces": int(len(surface.mesh.faces)),
            "mesh_size": float(A.h),
        },
        "stationarity": frame.summary(),
        "spectrum": spec.to_dict(),
        "index_bracket": {"bracket": list(br["bracket"]), "widened": list(br["widened"]),
                          "indeterminate": bool(br["indeterminate"])},
        "verdict": spec.verdict,
        "witness": {"Q": float(witness_direct), "constraint": float(spec.witness_constraint),
                    "certifies_instability": bool(witness_direct < -spec.eps_zero)},
        "topology": {**topo.to_dict(), "violations": bound_violations(spec.constrained_index, preds)},
        "structural": {
            "gauss_bonnet_residual": float(ed["gauss_bonnet_residual"]),
            "area": float(ed["area"]),
            "boundary_length": float(ed["boundary_length"]),
            "assembly_symmetric": bool((Am - Am.T).nnz == 0),
        },
    }
    return Analysis(report, surface, A, spec)


def write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    Path(path).write_text(text)
    return str(path)


def write_analysis(result, out_dir, cfg, stem="analysis"):
    """JSON report, spectrum CSV, eigenfunction CSV and optional SVG figures."""
    from . import plotting

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep, spec, mesh = result.report, result.spectrum, result.surface.mesh
    files = [write_json(rep, out / f"{stem}.json")]
    with open(out / f"{stem}_spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "eigenvalue"])
        for i, v in enumerate(spec.eigenvalues):
            w.writerow(["robin", i, repr(float(v))])
        for i, v in enumerate(spec.constrained_eigenvalues):
            w.writerow(["constrained", i, repr(float(v))])
    files.append(str(out / f"{stem}_spectrum.csv"))
    k = min(cfg["output"]["eigenvectors"], spec.eigenvectors.shape[1])
    with open(out / f"{stem}_eigenfunctions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "x", "y", "z", "witness"] + [f"mode_{j}" for j in range(k)])
        for i in range(mesh.n_vertices):
            w.writerow([i] + [repr(float(x)) for x in mesh.vertices[i]] + [repr(float(spec.witness[i]))]
                       + [repr(float(spec.eigenvectors[i, j])) for j in range(k)])
    files.append(str(out / f"{stem}_eigenfunctions.csv"))
    if cfg["output"]["figures"]:
        files.append(plotting.plot_spectrum(spec.eigenvalues, spec.constrained_eigenvalues, spec.eps_zero,
                                            out / f"{stem}_spectrum.svg", rep["surface"]["label"]))
        files.append(plotting.plot_field(mesh, spec.witness, out / f"{stem}_witness.svg",
                                         "lowest constrained mode"))
    if cfg["output"]["export_matrices"]:
        files += [str(out / "matrices" / n) for n in result.assembly.export(out / "matrices")]
    return files


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------

SUITES = ("euclidean", "hyperbolic", "spherical", "appendix")


def _surface_jobs(ball, families):
    jobs = []
    for fam in families:
        def run(fam=fam):
            s = build_family(fam, ball)
            out = [ids.check_phi_auxiliary(s)]
            for a in ids.AXES:
                spec = ids.TestFunctionSpec(a)
                out += [ids.check_admissibility(s, spec), ids.check_boundary_identity(s, spec),
                        ids.check_interior_identity(s, spec)]
            return [r.to_dict() for r in out]
        jobs.append((f"{ball.space.name}(R={ball.radius:g})/{fam.label()}", run))
    return jobs


def _killing_job(ball):
    return (f"killing/{ball.space.name}(R={ball.radius:g})", lambda: [ids.check_killing(ball).to_dict()])


def suite_jobs(suite):
    """Named zero-argument jobs for a suite; each returns a list of check records."""
    E, Hy, Sp = (sf.AmbientSpace(k) for k in (0, -1, 1))
    jobs = []
    if suite in ("euclidean", "all"):
        ball = sf.AmbientBall(E, 1.0)
        fams = [SurfaceFamily.make("flat_disk", c=c) for c in (0.0, 0.3, -0.3, 0.5, -0.5)]
        fams.append(SurfaceFamily.make("catenoid", critical=True))
        jobs += [_killing_job(ball)] + _surface_jobs(ball, fams)
    if suite in ("hyperbolic", "all"):
        for R in (0.5, 1.0, 2.0):
            ball = sf.AmbientBall(Hy, R)
            fams = [SurfaceFamily.make("geodesic_disk", offset=0.0)]
            if R == 1.0:
                fams.append(SurfaceFamily.make("geodesic_disk", offset=0.3))
            jobs += [_killing_job(ball)] + _surface_jobs(ball, fams)
    if suite in ("spherical", "all"):
        for R in (1.0, 2.0, 2.5):
            ball = sf.AmbientBall(Sp, R)
            fams = [SurfaceFamily.make("geodesic_disk", offset=0.0)]
            if R == 1.0:
                fams.append(SurfaceFamily.make("geodesic_disk", offset=0.3))
            jobs += [_killing_job(ball)] + _surface_jobs(ball, fams)
    if suite in ("appendix", "all"):
        jobs += appendix_jobs()
    if not jobs:
        raise CapstabError(f"unknown suite {suite!r}", module="cli")
    return jobs


FD_DATA = {
    "x1": lambda X: X[0],
    "x1^2-1/2": lambda X: X[0] ** 2 - 0.5,
    "x1*x2": lambda X: X[0] * X[1],
}


def fd_record(surface, name, datum, sign_only=False):
    """Second-variation consistency check as a verification record."""
    from .flow import second_variation_fd

    r = second_variation_fd(surface, datum)
    d = r.to_dict()
    if sign_only:
        tol = 0.05 * abs(r.Q)
        passed = r.fd < 0 and r.discrepancy <= tol
    else:
        tol = max(1e-4, 0.01 * abs(r.Q))
        passed = r.discrepancy <= tol and r.observed_order >= 2
    d.update({"id": "second_variation_fd", "surface": surface.label, "datum": name,
              "tolerance": float(tol), "pass": bool(passed)})
    return d


def appendix_jobs():
    flat = SurfaceFamily.make("flat_disk", c=0.0)
    jobs = [(f"fd/{flat.label()}/{name}", lambda name=name, f=f: [fd_record(build_family(flat), name, f)])
            for name, f in FD_DATA.items()]
    cat = SurfaceFamily.make("catenoid", critical=True)
    jobs.append((f"fd/{cat.label()}/x3",
                 lambda: [fd_record(build_family(cat), "x3", lambda X: X[2], sign_only=True)]))
    return jobs


def run_jobs(jobs, threads=1):
    """Run named jobs in a worker pool; results keep job order. Failures are recorded."""
    def guarded(job):
        name, fn = job
        try:
            return name, fn(), None
        except CapstabError as exc:
            return name, [], exc

    if threads <= 1:
        results = [guarded(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(guarded, jobs))
    return results


def verify(suite, threads=1):
    results = run_jobs(suite_jobs(suite), threads)
    checks, errors = [], []
    for name, recs, exc in results:
        for r in recs:
            checks.append({"job": name, **r})
        if exc is not None:
            errors.append({"job": name, "error": str(exc), "exit_code": exc.exit_code})
    passed = not errors and all(c["pass"] for c in checks)
    report = {"schema_version": SCHEMA_VERSION, "command": "verify", "suite": suite,
              "n_checks": len(checks), "n_failed": sum(not c["pass"] for c in checks),
              "errors": errors, "pass": bool(passed), "checks": checks}
    return report


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep(cfg, threads=1):
    """One analysis per grid value; per-point failures are recorded and the sweep continues."""
    sw = cfg["sweep"]
    param = sw["parameter"]

    def point(v):
        if param == "radius":
            c = cfg.with_updates(ambient={"radius": v})
        else:
            params = dict(cfg["surface"]["params"])
            params[param] = v
            c = cfg.with_updates(surface={"params": params})
        res = analyze(c)
        spec = res.spectrum
        ev = list(spec.eigenvalues) + [float("nan")] * 2
        return {"value": v, "theta": res.report["stationarity"]["theta_mean"], "lambda_1": float(ev[0]),
                "lambda_2": float(ev[1]), "k_neg": int(spec.k_neg),
                "constrained_index": int(spec.constrained_index), "verdict": spec.verdict, "error": ""}

    jobs = [(f"{param}={v}", lambda v=v: [point(v)]) for v in sw["values"]]
    rows = []
    for (name, recs, exc), v in zip(run_jobs(jobs, threads), sw["values"]):
        if exc is not None:
            rows.append({"value": v, "theta": float("nan"), "lambda_1": float("nan"), "lambda_2": float("nan"),
                         "k_neg": -1, "constrained_index": -1, "verdict": "error", "error": str(exc)})
        else:
            rows.extend(recs)
    return {"schema_version": SCHEMA_VERSION, "command": "sweep", "config": cfg.to_dict(),
            "parameter": param, "rows": rows}


def write_sweep(result, out_dir, figures=True, stem="sweep"):
    from . import plotting

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = result["rows"]
    cols = ["value", "theta", "lambda_1", "lambda_2", "k_neg", "constrained_index", "verdict", "error"]
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([result["parameter"]] + cols[1:])
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
    files = [write_json(result, out / f"{stem}.json"), str(out / f"{stem}.csv")]
    if figures:
        ok = [r for r in rows if not r["error"]]
        files.append(plotting.plot_sweep(result["parameter"], [r["value"] for r in ok],
                                         [r["lambda_1"] for r in ok], [r["lambda_2"] for r in ok],
                                         out / f"{stem}.svg"))
    return files


def summarize_checks(checks):
    """Worst residual per check id (for terse console output)."""
    out = {}
    for c in checks:
        key = c["id"]
        val = c.get("residual_max", c.get("discrepancy", 0.0))
        out[key] = max(out.get(key, 0.0), float(val) if np.isfinite(val) else np.inf)
    return out
