"""Scenario runner: ``rqed <subcommand> --config cfg.json --out dir``.

Every config is validated against a JSON schema shipped in
``rqed/schemas`` before anything is computed.  Outputs are CSV files with
unit-bearing headers, JSON result files, and a ``manifest.json`` holding the
tool version, the resolved parameters and the largest truncation loss.  The
manifest carries no timestamps and no worker count, so runs with the same
config and seed are byte-identical.

Exit codes: 0 ok, 2 config/schema violation, 3 numerical guard, 4 io error.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema
import numpy as np
from scipy import integrate

from . import __version__, covariance, environment, fock, homodyne, noise, polarization
from .errors import RQEDError
from .grid import Constants, FieldConfiguration, WaveGrid, coherent_energy, total_energy

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

DEFAULT_SEED = 20240101
SIGN_TOL = 1e-12  # margins above -SIGN_TOL count as satisfied

SUBCOMMANDS = (
    "shot-noise",
    "reconstruct",
    "pair-correlation",
    "covariance",
    "dgcz-scan",
    "dgcz-threshold",
    "energy",
)


class ConfigError(Exception):
    pass


def load_schema(name):
    text = resources.files("rqed").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


def validate(name, cfg):
    try:
        jsonschema.validate(cfg, load_schema(name))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None


# --- small helpers ----------------------------------------------------------


def _complex(v, default=0j):
    if v is None:
        return default
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _sweep(s):
    return np.linspace(s["start"], s["stop"], s["num"])


def _constants(cfg):
    return Constants(**cfg.get("constants", {}))


def build_state(spec, cutoff):
    kind = spec["type"]
    if kind == "vacuum":
        return fock.vacuum(cutoff)
    if kind == "coherent":
        amps = fock.CoherentAmplitudes(_complex(spec.get("alpha_H")), _complex(spec.get("alpha_V")))
        return fock.make_coherent(amps, cutoff)
    coeffs = {}
    for m, n, re, im in spec["amplitudes"]:
        coeffs[(m, n)] = coeffs.get((m, n), 0j) + complex(re, im)
    s = fock.from_coefficients(coeffs, cutoff)
    if not s.is_normalized():
        raise fock.NotNormalized(f"fock amplitudes have norm {s.norm()!r}")
    return s


def pmap(fn, items, workers):
    """Ordered map; the worker count never changes the result."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def fmt(x):
    return repr(float(x))


class Outputs:
    """Collects files in memory and writes them only after the run succeeds."""

    def __init__(self):
        self.files = {}
        self.dropped_mass = 0.0

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        self.files[name] = buf.getvalue()

    def json(self, name, obj):
        self.files[name] = json.dumps(obj, indent=2, sort_keys=True) + "\n"

    def note_dropped(self, mass):
        self.dropped_mass = max(self.dropped_mass, float(mass))

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        for name, text in sorted(self.files.items()):
            with open(os.path.join(out_dir, name), "w", newline="") as fh:
                fh.write(text)


# --- subcommands ------------------------------------------------------------


def run_shot_noise(cfg, opts, out):
    consts = _constants(cfg)
    k = np.asarray(cfg["k"], dtype=np.float64)
    s = build_state(cfg["state"], opts.ncut)
    kn = float(np.linalg.norm(k))
    if kn == 0.0:
        raise ConfigError("k: wave vector must be non-vanishing")
    # phase theta realized by x0 = theta / |k| at the origin
    def row(theta):
        x = noise.SpaceTimePoint(theta / kn)
        v = noise.variances_for_state(s, k, x, consts)
        ref = noise.shot_noise_level(k, x, consts)
        return (theta, v.var_cos, v.var_sin, ref.var_cos, ref.var_sin)

    rows = pmap(row, _sweep(cfg["phases"]), opts.workers)
    out.csv(
        "shot_noise.csv",
        ["phase [rad]", "var_cos [E^2]", "var_sin [E^2]", "shot_cos [E^2]", "shot_sin [E^2]"],
        rows,
    )
    return {"prefactor": noise.prefactor(k, consts)}


def run_reconstruct(cfg, opts, out):
    g = cfg["grid"]
    if len(g["magnitudes"]) != len(g["weights"]):
        raise ConfigError("grid: magnitudes and weights differ in length")
    grid = WaveGrid.collinear(
        g["magnitudes"], g["weights"], {"A": g["lo_region"], "B": g["signal_region"]}
    )
    lo = {e["index"]: (_complex(e.get("F_H")), _complex(e.get("F_V"))) for e in cfg["lo"]}
    signal = {e["index"]: build_state(e["state"], opts.ncut) for e in cfg["signal"]}
    mixed = homodyne.MixedField(
        grid, lo, signal, cfg.get("epsilon", 1e-3), opts.ncut, _constants(cfg)
    )
    for i in lo:
        out.note_dropped(mixed.lo_state(i).dropped_mass)
    x0s = homodyne.commensurate_sampling(
        grid.norms, cfg.get("periods", homodyne.MIN_PERIODS), cfg.get("oversample", 4)
    )
    kw = dict(
        x0s=x0s,
        bin_width=cfg.get("bin_width"),
        xvec=tuple(cfg.get("detector", (0.0, 0.0, 0.0))),
        workers=opts.workers,
    )
    rows = []
    for omega in cfg["omegas"]:
        re = homodyne.reconstruct_overlaps(mixed, omega, False, **kw)
        im = homodyne.reconstruct_overlaps(mixed, omega, True, **kw)
        for j in sorted(re):
            r, q = re[j], im[j]
            err = abs(complex(r.value, q.value) - complex(r.target, q.target))
            rows.append(
                (float(omega), float(grid.norms[j]), r.value, q.value, r.target, q.target, err)
            )
    out.csv(
        "reconstruct.csv",
        [
            "omega [c/length]",
            "k_signal [1/length]",
            "re_recovered [1]",
            "im_recovered [1]",
            "re_oracle [1]",
            "im_oracle [1]",
            "abs_error [1]",
        ],
        rows,
    )
    return {"samples": int(len(x0s)), "window_length": float(x0s[1] * len(x0s))}


def _pair_coefficients(cfg, rng):
    c = cfg["coefficients"]
    if c == "random":
        return polarization.PairCoefficients.random(rng)
    vals = np.array([_complex(c.get(k)) for k in ("c00", "c20", "c11", "c02")])
    return polarization.PairCoefficients(*vals)


def run_pair_correlation(cfg, opts, out):
    rng = np.random.default_rng(opts.seed)
    c = _pair_coefficients(cfg, rng)
    literal = cfg.get("literal", False)

    def row(phi):
        p_hh, p_hv = polarization.joint_probabilities(c, phi, literal)
        o_hh, o_hv = polarization.sequential_oracle(c, phi)
        d = polarization.rotate_coefficients(c, phi)
        return (phi, p_hh, p_hv, abs(d.d11), p_hh - o_hh, p_hv - o_hv)

    rows = pmap(row, _sweep(cfg["phi"]), opts.workers)
    out.csv(
        "pair_correlation.csv",
        ["phi [rad]", "P_HH [1]", "P_HV [1]", "d11_abs [1]", "oracle_delta_HH [1]", "oracle_delta_HV [1]"],
        rows,
    )
    return {"coefficients": [[z.real, z.imag] for z in c.as_array().tolist()]}


def run_covariance(cfg, opts, out):
    mode = cfg.get("mode", "H")
    branches = [
        covariance.Branch(b["prob"], build_state(b["k"], opts.ncut), build_state(b["kp"], opts.ncut))
        for b in cfg["branches"]
    ]
    ens = covariance.SeparableEnsemble(branches)
    for b in branches:
        out.note_dropped(max(b.sigma.dropped_mass, b.tau.dropped_mass))
    cov = covariance.covariance(ens, mode)
    dp, dq = covariance.dgcz_terms(cov)
    excess = covariance.sigma0_discrepancy(ens, mode)
    res = {
        "sigma_re": cov.sigma.real.tolist(),
        "sigma_im": cov.sigma.imag.tolist(),
        "mean": cov.mean.tolist(),
        "delta2_p_minus": dp,
        "delta2_q_plus": dq,
        "dgcz_sum": dp + dq,
        "sigma0_excess": excess,
        "sigma0_flag": bool(excess is not None and excess > 1e-12),
    }
    out.json("covariance.json", res)
    return {"dgcz_sum": dp + dq}


def run_dgcz_scan(cfg, opts, out):
    fam = cfg["family"]

    def row(t):
        spec = environment.family_spec(fam, float(t))
        _, _, margin = environment.dgcz_one_photon(spec)
        direct = environment.dgcz_one_photon_direct(spec)
        return (float(t), margin, direct, int(margin < -SIGN_TOL), int(direct < -SIGN_TOL))

    rows = pmap(row, _sweep(cfg["parameter"]), opts.workers)
    out.csv(
        "dgcz_scan.csv",
        ["parameter [1]", "margin [1]", "direct [1]", "violated_margin [bool]", "violated_direct [bool]"],
        rows,
    )
    extra = {}
    n_random = cfg.get("random_specs", 0)
    if n_random:
        rng = np.random.default_rng(opts.seed)
        specs = [environment.OnePhotonBranchSpec.random(rng) for _ in range(n_random)]

        def rrow(i):
            s = specs[i]
            _, _, margin = environment.dgcz_one_photon(s)
            direct = environment.dgcz_one_photon_direct(s)
            return (i, margin, direct, environment.same_branch_cross_term(s))

        rrows = pmap(rrow, range(n_random), opts.workers)
        out.csv(
            "dgcz_random.csv",
            ["index [1]", "margin [1]", "direct [1]", "cross_term [1]"],
            rrows,
        )
        rel = environment.margin_relation(specs)
        out.json("dgcz_relation.json", rel)
        extra["sign_agreement"] = rel["sign_agreement"]
    return extra


def run_dgcz_threshold(cfg, opts, out):
    fam = cfg["family"]
    tol = cfg.get("tol", 1e-9)
    t = environment.threshold_scan(fam, cfg["lo"], cfg["hi"], tol)
    try:
        t_direct = environment.threshold_scan(
            fam, cfg["lo"], cfg["hi"], tol, fn=environment.dgcz_one_photon_direct
        )
    except RQEDError:
        t_direct = None
    spec = environment.family_spec(fam, t)
    re, im = spec.c_up_k.real, spec.c_up_k.imag
    res = {
        "family": fam,
        "boundary": t,
        "boundary_u2_plus_v2": re * re + im * im,
        "direct_boundary": t_direct,
        "tol": tol,
    }
    out.json("threshold.json", res)
    return {"boundary": t}


def _profile(cfg):
    p = cfg["profile"]
    ah, av = _complex(p.get("amplitude_H"), 1.0), _complex(p.get("amplitude_V"))
    c, w = p["center"], p["width"]

    def env(k):
        return np.exp(-((np.asarray(k) - c) ** 2) / (2 * w * w))

    return ah, av, env


def run_energy(cfg, opts, out):
    consts = _constants(cfg)
    b = cfg["beam"]
    if b["kmax"] <= b["kmin"]:
        raise ConfigError("beam: kmax must exceed kmin")
    ah, av, env = _profile(cfg)
    scale = consts.ell**3 * consts.hbar * consts.c * (abs(ah) ** 2 + abs(av) ** 2)
    exact, _ = integrate.quad(lambda k: k * env(k) ** 2, b["kmin"], b["kmax"], epsabs=1e-14, epsrel=1e-13)
    exact *= scale

    def row(level):
        n = b["n"] * 2**level
        grid = WaveGrid.beam(b["kmin"], b["kmax"], n)
        prof = env(grid.norms)
        f = FieldConfiguration.coherent(grid, ah * prof, av * prof, opts.ncut, consts)
        e = total_energy(f)
        closed = coherent_energy(grid, ah * prof, av * prof, consts)
        dropped = max(s.dropped_mass for s in f.states)
        return (n, e, closed, abs(e - exact)), dropped

    results = pmap(row, range(cfg.get("refinements", 3) + 1), opts.workers)
    rows = []
    prev = None
    for (n, e, closed, err), dropped in results:
        out.note_dropped(dropped)
        ratio = prev / err if prev is not None and err > 0 else math.nan
        rows.append((n, e, closed, exact, err, ratio))
        prev = err
    out.csv(
        "energy.csv",
        [
            "n_points [1]",
            "energy [hbar*c/length]",
            "closed_form [hbar*c/length]",
            "reference [hbar*c/length]",
            "abs_error [hbar*c/length]",
            "error_ratio [1]",
        ],
        rows,
    )
    return {"reference": exact}


RUNNERS = {
    "shot-noise": run_shot_noise,
    "reconstruct": run_reconstruct,
    "pair-correlation": run_pair_correlation,
    "covariance": run_covariance,
    "dgcz-scan": run_dgcz_scan,
    "dgcz-threshold": run_dgcz_threshold,
    "energy": run_energy,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="rqed", description="Run a field-model scenario")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--ncut", type=int, default=fock.DEFAULT_CUTOFF, help="Fock cutoff per mode")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for random draws")
        p.add_argument("--workers", type=int, default=1, help="parallel workers (never changes results)")
    return parser


def run(command, config_path, out_dir, ncut=fock.DEFAULT_CUTOFF, seed=DEFAULT_SEED, workers=1):
    """Run one scenario; returns the exit status."""
    opts = argparse.Namespace(ncut=ncut, seed=seed, workers=max(1, workers))
    try:
        with open(config_path) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Outputs()
    try:
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        validate(command, cfg)
        if ncut < 1:
            raise ConfigError("--ncut must be positive")
        summary = RUNNERS[command](cfg, opts, out)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except RQEDError as exc:
        print(f"error: numerical guard: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = {
        "tool": "rqed",
        "version": __version__,
        "command": command,
        "config": cfg,
        "ncut": ncut,
        "seed": seed,
        "dropped_mass": out.dropped_mass,
        "outputs": sorted(out.files),
        "summary": summary,
    }
    out.json("manifest.json", manifest)
    try:
        out.write(out_dir)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"seed={seed} wrote {len(out.files)} files to {out_dir}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.ncut, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
