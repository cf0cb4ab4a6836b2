"""Command-line front end.

Subcommands: material, dispersion, hybridize, spectrum, evolve, verify.
Exit codes: 0 ok, 1 verify failure (or other error), 2 config, 3 material,
4 no mode, 5 no phase match.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import coupling as cp
from . import quantum as qm
from . import slabmodes as sm
from . import spectral as spc
from .config import RunConfig, load_config
from .errors import CherenkovError, ConfigError, NoMode, PhaseMatchError, SingularMaterial, TailOverflow, TruncationLeak
from .media import build_material_matrix, cherenkov_thresholds, definiteness_at, locate_definiteness_flip

# -- output helpers ----------------------------------------------------------------


def _dumps(obj) -> str:
    try:
        return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    except ValueError:
        raise ArithmeticError("non-finite value in JSON output") from None


def _c(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


class Writer:
    """Collects outputs and writes them once computation is complete."""

    def __init__(self, cfg: RunConfig, out: str | None):
        self.dir = Path(out if out is not None else cfg.out_dir)
        self.formats = set(cfg.formats)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        if name.rsplit(".", 1)[-1] in self.formats:
            self.files[name] = text

    def flush(self):
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (self.dir / name).write_text(text, encoding="utf-8")
        for name in self.files:
            print(self.dir / name)


def _check_materials(cfg: RunConfig):
    for i, s in enumerate(cfg.stack):
        try:
            build_material_matrix(s.material, s.beta)
        except SingularMaterial as e:
            raise SingularMaterial(f"stack[{i}]: {e}") from None


def _two_slabs(cfg: RunConfig):
    if len(cfg.stack) != 2:
        raise ConfigError(f"stack: this command needs exactly two slabs, got {len(cfg.stack)}")
    return sorted(cfg.stack, key=lambda s: s.z0)


# -- subcommands ---------------------------------------------------------------------


def cmd_material(cfg: RunConfig, w: Writer) -> int:
    slabs = []
    for i, s in enumerate(cfg.stack):
        try:
            mm = build_material_matrix(s.material, s.beta)
        except SingularMaterial as e:
            raise SingularMaterial(f"stack[{i}]: {e}") from None
        lo, hi = cherenkov_thresholds(s.material)
        d = definiteness_at(s.material, s.beta)
        slabs.append({
            "index": i,
            "epsilon": s.material.epsilon,
            "mu": s.material.mu,
            "beta": s.beta,
            "matrix": mm.to_dict(),
            "definiteness": d.tag.value,
            "min_eigenvalue": d.min_eigenvalue,
            "threshold_indefinite": lo,
            "threshold_instability": hi,
        })
        print(f"stack[{i}]: n = {s.material.n:g}, beta = {s.beta:g}: {d.tag.value}")
    background = {"definiteness": "PositiveDefinite", "epsilon": 1.0, "mu": 1.0}
    if not slabs:
        print("vacuum: PositiveDefinite")
    w.add("material.json", _dumps({"background": background, "slabs": slabs}))
    return 0


def cmd_dispersion(cfg: RunConfig, w: Writer) -> int:
    if len(cfg.stack) != 1:
        raise ConfigError(f"stack: dispersion needs exactly one slab, got {len(cfg.stack)}")
    slab, m = cfg.stack[0], cfg.mode
    records, skipped = [], 0
    for kx in np.linspace(m.kx_min, m.kx_max, m.n_points):
        tmpl = sm.ModeQuery(slab, 1.0, m.ky, m.polarization, m.branch)
        try:
            kc = sm.comoving_kx_for_lab(tmpl, float(kx), slab.beta)
            records.append(sm.lab_mode_record(sm.ModeQuery(slab, kc, m.ky, m.polarization, m.branch)))
        except NoMode:
            skipped += 1
    if not records:
        raise NoMode(f"no guided mode for kx in [{m.kx_min}, {m.kx_max}]")
    w.add("dispersion.csv", sm.dispersion_csv(records, skipped))
    print(f"solved {len(records)} points, skipped {skipped}")
    return 0


def _phase_matched_pair(cfg: RunConfig) -> cp.CoupledPair:
    s1, s2 = _two_slabs(cfg)
    m, p = cfg.mode, cfg.pair
    kw = dict(ky=m.ky, polarization=m.polarization, branches=(m.branch, m.branch))
    if p.kx is None:
        pair = cp.phase_match(s1, s2, **kw)
    else:
        pair, last = None, None
        for conj in (False, True):
            try:
                pair = cp.phase_match(s1, s2, kx=p.kx, conjugate2=conj, **kw)
                break
            except (CherenkovError, ValueError) as e:
                last = e
        if pair is None:
            raise PhaseMatchError(f"pair.kx = {p.kx}: no phase match ({last})")
    if p.gamma0_d is not None:
        pair = cp.with_gap(pair, p.gamma0_d / pair.gamma0)
    elif p.gap is not None:
        pair = cp.with_gap(pair, p.gap)
    return pair


def cmd_hybridize(cfg: RunConfig, w: Writer) -> int:
    _check_materials(cfg)
    pair = _phase_matched_pair(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cc = cp.coupling_constants(pair)
    hm = cp.hybridize(cc)
    out = {
        "kx": pair.kx,
        "omega_prime": pair.omega_prime,
        "gamma0": pair.gamma0,
        "gap": pair.gap,
        "conjugate_partner": pair.conjugate2,
        "omega1": _c(cc.omega1),
        "omega2": _c(cc.omega2),
        "E_s1": cc.E_s1,
        "E_s2": cc.E_s2,
        "ratio_residual": cc.ratio_residual,
        "classification": hm.classification,
        "frequencies": [_c(x) for x in hm.frequencies],
    }
    out["lambda" if hm.unstable else "delta_omega"] = hm.split
    if hm.unstable:
        hm = cp.hybrid_mode_fields(pair, cc, hm)
        out["krein"] = {"ff": _c(hm.ff), "ee": _c(hm.ee), "ef": _c(hm.ef), "tolerance": cp.weak_tolerance(pair)}
    if caught:
        out["warnings"] = [str(x.message) for x in caught]
    t = np.linspace(0.0, cfg.pair.lambda_t_max / hm.split, cfg.pair.n_t)
    tr = cp.classical_trajectory(hm, pair, t, cfg.pair.hybrid)
    out["bracket1"], out["bracket2"] = tr.bracket1, tr.bracket2
    w.add("hybridize.json", _dumps(out))
    w.add("trajectory.csv", tr.to_csv())
    print(f"{hm.classification}: omega' = {pair.omega_prime:.12g}, split = {hm.split:.6e}")
    return 0


def _spectral_run(cfg: RunConfig, kx=None):
    _check_materials(cfg)
    k = (cfg.mode.kx if kx is None else kx, cfg.mode.ky)
    op = spc.assemble_operators(list(cfg.stack), k, cfg.N_z, cfg.L_z)
    spec = spc.solve_spectrum(op)
    basis = spc.build_krein_basis(spec, op)
    return op, spec, basis


def _spectral_residuals(cfg: RunConfig, op, spec, basis) -> dict[str, float]:
    res = {
        "hermiticity": spc.hermiticity_residual(op),
        "conjugate_closure": spec.conjugate_residual,
        "completeness": spc.verify_completeness(basis, op),
        "commutator_kernel": spc.verify_commutator_kernel(basis, op),
        "gram": basis.gram_residual,
        "null_product": spc.complex_null_products(spec, op),
    }
    if all(s.beta == 0 for s in cfg.stack):
        res["reflection"] = spec.reflection_residual
    else:
        op_m = spc.assemble_operators(list(cfg.stack), (-op.kx, -op.ky), cfg.N_z, cfg.L_z)
        res["plus_minus_k"] = spc.pm_k_residual(spec, spc.solve_spectrum(op_m))
    return res


def cmd_spectrum(cfg: RunConfig, w: Writer) -> int:
    op, spec, basis = _spectral_run(cfg)
    sig = {int(i): int(np.sign(op.krein(spec.vectors[:, i], spec.vectors[:, i]).real)) for i in spec.real_idx}
    out = {
        "kx": op.kx,
        "ky": op.ky,
        "N_z": op.Nz,
        "L_z": op.Lz,
        "eigenvalues": json.loads(spec.to_json(sig)),
        "complex_pairs": [_c(x) for x in spec.complex_pairs],
        "condition": basis.condition,
        "residuals": _spectral_residuals(cfg, op, spec, basis),
    }
    w.add("spectrum.json", _dumps(out))
    print(f"{len(spec.omegas)} eigenvalues, {len(spec.complex_pairs)} complex pairs")
    return 0


def _pair_parameters(cfg: RunConfig) -> tuple[float, float]:
    q = cfg.quantum
    if q.lam != "from-spectrum":
        return q.omega_prime, float(q.lam)
    _, spec, _ = _spectral_run(cfg)
    if not spec.complex_pairs:
        raise CherenkovError("quantum.lambda = from-spectrum, but the spectrum has no complex pair")
    wc = max(spec.complex_pairs, key=lambda z: z.imag)
    return wc.real, wc.imag


def cmd_evolve(cfg: RunConfig, w: Writer) -> int:
    q = cfg.quantum
    omega_prime, lam = _pair_parameters(cfg)
    t = np.linspace(0.0, q.t_max, q.n_t)
    try:
        ev = qm.evolve_pair_vacuum(lam, q.t_max, qm.TruncatedFock(q.n_max, "chain"), t, guard=q.guard)
    except TailOverflow as e:
        raise TailOverflow(f"evolution guard (quantum.guard): {e}") from None
    obs = qm.observables(ev, omega_prime)
    exact = qm.analytic_coefficients(lam, ev.t[:, None], np.arange(min(64, q.n_max) + 1))
    summary = {
        "omega_prime": omega_prime,
        "lambda": lam,
        "n_max": q.n_max,
        "max_norm_drift": float(np.abs(obs.norm - 1).max()),
        "max_analytic_error": float(np.abs(ev.c[:, : exact.shape[1]].real - exact).max()),
        "max_tail": ev.max_tail,
    }
    w.add("evolution.csv", qm.evolution_csv(ev, omega_prime, q.n_coefficients))
    w.add("evolution.json", _dumps(summary))
    print(f"lambda t_max = {lam * q.t_max:g}, norm drift = {summary['max_norm_drift']:.2e}")
    return 0


# -- verification suite -------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def to_dict(self) -> dict:
        d = {"name": self.name, "status": "pass" if self.passed else "fail", "tolerance": self.tolerance}
        if math.isfinite(self.residual):
            d["residual"] = self.residual
        if self.note:
            d["note"] = self.note
        return d


def run_checks(cfg: RunConfig) -> list[Check]:
    tol = cfg.tolerances
    out: list[Check] = []
    _check_materials(cfg)

    for i, s in enumerate(cfg.stack):
        n = s.material.n
        if n > 1:
            flip = locate_definiteness_flip(s.material)
            out.append(Check(f"stack[{i}] definiteness flip at 1/n", abs(flip - 1 / n), tol["definiteness_flip"]))
            m = cfg.mode
            rec = sm.lab_mode_record(sm.ModeQuery(s, m.kx, m.ky, m.polarization, m.branch))
            out.append(Check(f"stack[{i}] group/phase velocity identity", rec.velocity_residual, tol["velocity_identity"]))
            if m.ky == 0.0:
                for c in sm.frame_sign_checks(rec, tol["velocity_identity"]):
                    res = c.residual if c.passed or c.residual > c.tolerance else math.inf  # sign rules carry no residual
                    out.append(Check(f"stack[{i}] {c.name}", res, c.tolerance))

    if len(cfg.stack) == 2 and all(s.material.n > 1 for s in cfg.stack):
        try:
            pair = _phase_matched_pair(cfg)
        except PhaseMatchError as e:
            out.append(Check("phase match", math.inf, 0.0, str(e)))
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cc = cp.coupling_constants(pair)
            out.append(Check("coupling ratio identity", cc.ratio_residual, tol["coupling_ratio"]))
            out.append(Check("coupling product is real", abs(cc.product.imag) / abs(cc.product), 1e-8))

    op, spec, basis = _spectral_run(cfg)
    names = {
        "hermiticity": "hermiticity",
        "conjugate_closure": "quartet",
        "reflection": "quartet",
        "plus_minus_k": "quartet",
        "completeness": "completeness",
        "commutator_kernel": "commutator_kernel",
        "gram": "gram",
        "null_product": "null_product",
    }
    for k, v in _spectral_residuals(cfg, op, spec, basis).items():
        out.append(Check(f"spectral {k}", v, tol[names[k]]))

    q = cfg.quantum
    if isinstance(q.lam, str):
        wc = max(spec.complex_pairs, key=lambda z: z.imag) if spec.complex_pairs else complex(q.omega_prime, 0.1)
    else:
        wc = complex(q.omega_prime, q.lam)
    try:
        rep = qm.verify_commutators(qm.TruncatedFock(16), wc)
        out.append(Check("pair commutators (interior)", rep.max_residual, tol["commutators"]))
    except TruncationLeak as e:
        out.append(Check("pair commutators (interior)", math.inf, tol["commutators"], str(e)))
    lam = wc.imag
    ev = qm.evolve_pair_vacuum(lam, 1.0 / lam, qm.TruncatedFock(128, "chain"), guard=False, tol=1e-12)
    exact = qm.analytic_coefficients(lam, ev.t[:, None], np.arange(17))
    out.append(Check("chain norm conservation", float(np.abs(ev.norm - 1).max()), tol["norm"]))
    out.append(Check("chain vs exact solution", float(np.abs(ev.c[:, :17].real - exact).max()), tol["analytic"]))
    return out


def cmd_verify(cfg: RunConfig, w: Writer) -> int:
    checks = run_checks(cfg)
    failed = [c for c in checks if not c.passed]
    width = max(len(c.name) for c in checks)
    for c in checks:
        res = f"{c.residual:.3e}" if math.isfinite(c.residual) else "-"
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {res:>10}  <= {c.tolerance:.1e}")
    report = {"checks": [c.to_dict() for c in checks], "passed": not failed, "exit_code": 1 if failed else 0}
    w.add("verify.json", _dumps(report))
    if failed:
        print("failed: " + ", ".join(c.name for c in failed), file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "material": cmd_material,
    "dispersion": cmd_dispersion,
    "hybridize": cmd_hybridize,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cherenkov", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="repeatable")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        w = Writer(cfg, args.out)
        code = COMMANDS[args.command](cfg, w)
        w.flush()
        return code
    except CherenkovError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (ArithmeticError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
