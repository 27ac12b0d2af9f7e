"""Command-line entry point: ``mldrbeam {simulate,enhance,evaluate,sweep,validate}``."""

import argparse
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import yaml

from .beamformers import CggdConfig, apply_weights, cggd_mldr, mpdr_weights, oracle_mvdr_weights
from .cxlinalg import default_floor, sample_covariance
from .errors import MldrBeamError
from .experiment import (BEAMFORMERS, CACHE_ENV, RirCache, load_run_spec, run_sweep,
                         validate_config, version_string)
from .metrics import si_sdr, sinr_improvement_from_bins
from .roomsim.render import render_scenario, write_rirs
from .roomsim.scenario import scenario_from_dict
from .roomsim.steering import MODES, steering_from_scenario
from .stft import Waveform, analyze, read_wav, synthesize, write_wav

log = logging.getLogger("mldrbeam")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _deterministic(enabled):
    """Single-threaded BLAS so reductions run in a fixed order."""
    if not enabled:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("threadpoolctl not installed; --deterministic only pins the seed")
        return nullcontext()
    return threadpool_limits(limits=1)


def _out_dir(path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    if not os.access(d, os.W_OK):
        raise MldrBeamError(f"output directory not writable: {d}")
    return d


def _scenario(args):
    spec = load_run_spec(args.config, seed=args.seed)
    cfg = dict(spec.scenario)
    cfg["seed"] = spec.seed
    return spec, scenario_from_dict(cfg, base_dir=spec.scenario_dir)


def cmd_simulate(args):
    spec, scen = _scenario(args)
    rirs = RirCache().get(scen)
    scene = render_scenario(scen, rirs)
    out = _out_dir(args.out)
    write_wav(out / "mixture.wav", scene.mixture)
    write_wav(out / "desired_image.wav", scene.desired_image)
    write_wav(out / "interference_noise_image.wav", scene.interference_plus_noise_image)
    write_rirs(rirs, out / "rirs", scen.sample_rate)
    with open(out / "scenario.yaml", "w") as fh:
        yaml.safe_dump(scen.to_dict(), fh, sort_keys=False)
    print(f"input SINR at mic {scen.reference_mic}: {scene.input_sinr_db(scen.reference_mic):.2f} dB")
    return EXIT_OK


def cmd_enhance(args):
    spec, scen = _scenario(args)
    rirs = RirCache().get(scen)
    if args.input:
        mix = read_wav(args.input)
    else:
        mix = render_scenario(scen, rirs).mixture
    y = analyze(mix)
    frames = np.transpose(y.bins, (1, 0, 2))
    h = steering_from_scenario(scen, args.steering or spec.steering, rirs=rirs)
    bf = args.beamformer
    if bf == "mpdr":
        w = mpdr_weights(sample_covariance(frames), h, spec.loading)
    elif bf == "oracle_mvdr":
        vs = analyze(render_scenario(scen, rirs).interference_plus_noise_image).bins
        w = oracle_mvdr_weights(sample_covariance(np.transpose(vs, (1, 0, 2))), h, spec.loading)
    else:
        p = 0.0 if bf == "mldr" else (args.p if args.p is not None else float(spec.p_grid[0]))
        cfg = CggdConfig(shape_p=p, floor_delta=default_floor(frames, spec.floor_scale),
                         max_iterations=args.iterations or spec.iterations or 1,
                         loading=spec.loading, convergence_tol=None)
        w = cggd_mldr(y, h, cfg).weights
    out = _out_dir(args.out)
    write_wav(out / "enhanced.wav", synthesize(apply_weights(w, y)))
    np.savez(out / "weights.npz", weights=w.weights)
    print(f"wrote {out / 'enhanced.wav'}")
    return EXIT_OK


def cmd_evaluate(args):
    spec, scen = _scenario(args)
    scene = render_scenario(scen, RirCache().get(scen))
    out = Path(args.out)
    ref = scen.reference_mic
    est = read_wav(args.estimate) if args.estimate else read_wav(out / "enhanced.wav")
    clean = Waveform(scene.desired_image.samples[ref : ref + 1], scene.mixture.sample_rate)
    mix = Waveform(scene.mixture.samples[ref : ref + 1], scene.mixture.sample_rate)
    n = min(est.length, clean.length)
    clean_n = Waveform(clean.samples[:, :n], clean.sample_rate)
    gain = si_sdr(clean_n, Waveform(est.samples[:1, :n], est.sample_rate)) - si_sdr(
        clean_n, Waveform(mix.samples[:, :n], mix.sample_rate))
    result = {"si_sdr_improvement_db": gain, "seed": scen.seed,
              "config_hash": scen.config_hash(), "version": version_string()}
    wfile = out / "weights.npz"
    if wfile.exists():
        with np.load(wfile) as z:
            w = z["weights"]
        xs = analyze(scene.desired_image).bins
        vs = analyze(scene.interference_plus_noise_image).bins
        result["output_sinr_improvement_db"] = sinr_improvement_from_bins(xs, vs, w, ref)
    _out_dir(out)
    (out / "evaluation.json").write_text(json.dumps(result, indent=1, sort_keys=True))
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args):
    over = {"seed": args.seed, "iterations": args.iterations}
    if args.beamformer:
        over["beamformers"] = [args.beamformer]
    if args.p is not None:
        over["p_grid"] = [args.p]
    if args.steering:
        over["steering"] = args.steering
    spec = load_run_spec(args.config, **over)
    out = _out_dir(args.out)
    report, failures = run_sweep(spec, out)
    n_cond = len(spec.conditions())
    print(f"{n_cond - len(failures)}/{n_cond} conditions ok; report in {out}")
    return EXIT_FAILED if failures else EXIT_OK


def cmd_validate(args):
    diags = validate_config(args.config)
    for d in diags:
        print(d)
    if not diags:
        print(f"{args.config}: ok")
    return EXIT_FAILED if diags else EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="mldrbeam", description=__doc__,
                                 epilog=f"RIRs are cached under ${CACHE_ENV} when it is set.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="run spec or scenario YAML, or preset:NAME")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded numerics for bit-identical audio")

    def bf_flags(p):
        p.add_argument("--beamformer", choices=BEAMFORMERS)
        p.add_argument("--p", type=float, help="CGGD shape parameter in [0, 2]")
        p.add_argument("--iterations", type=int)
        p.add_argument("--steering", choices=MODES)

    p = sub.add_parser("simulate", help="render a scene to WAV files")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("enhance", help="beamform a multichannel mixture")
    common(p)
    bf_flags(p)
    p.add_argument("--input", help="multichannel mixture WAV (default: render the scenario)")
    p.set_defaults(func=cmd_enhance)
    p = sub.add_parser("evaluate", help="score an enhanced signal against the rendered scene")
    common(p)
    p.add_argument("--estimate", help="enhanced WAV (default: <out>/enhanced.wav)")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("sweep", help="simulate, enhance and evaluate over a grid")
    common(p)
    bf_flags(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("validate", help="check a config without rendering")
    common(p, out=False)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "enhance" and args.beamformer is None:
        args.beamformer = "cggd"
    try:
        with _deterministic(args.deterministic):
            return args.func(args)
    except MldrBeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
