"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data error.  Every output file is
written atomically (temp file in the destination directory, then rename), and
every subcommand is bit-reproducible given the same inputs, flags, and seed,
at any thread count.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import formats, layered, quality
from .core import HdrImage, luminance
from .errors import HdrkitError
from .expand import ExpansionParams, expand
from .merge import ResponseCurve, estimate_response, load_stack_manifest
from .merge import align_global, merge as merge_stack
from .quality import dri_classify
from .tonemap import tonemap_global, tonemap_local
from .transfer import TransferFunction

_FLOAT_KINDS = ("hdr", "pfm")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _atomic_write(path, data):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".hdrkit-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _load_float(path, what="input"):
    kind = formats.sniff_kind(path)
    if kind not in _FLOAT_KINDS:
        raise _UsageError(f"{what} {path!r} must be a floating-point image (.hdr/.pic/.pfm)")
    return formats.load(path, kind)


def _dump_float(img, path, fmt=None):
    kind = fmt or formats.sniff_kind(path)
    opts = {}
    if kind == "xyze":
        kind, opts = "hdr", {"fmt": "xyze"}
    if kind not in _FLOAT_KINDS:
        raise _UsageError(f"output {path!r} must be a floating-point image (.hdr/.pic/.pfm)")
    _atomic_write(path, formats.dump(img, kind, **opts))


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _emit(report, as_json):
    if as_json:
        print(json.dumps(report, sort_keys=True))
    else:
        for k, v in report.items():
            print(f"{k}={_fmt_value(v)}")


def _parse_saturation(text):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise _UsageError(f"--saturation takes 'auto' or a number, got {text!r}")


def _parse_linearizer(text):
    if text == "srgb":
        return TransferFunction.srgb()
    if text == "gamma22":
        return TransferFunction.gamma22()
    if text.startswith("crf:"):
        return ResponseCurve.load(text[4:])
    raise _UsageError(f"--linearizer takes srgb, gamma22, or crf:<file>, got {text!r}")


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_convert(args):
    img = _load_float(args.input)
    _dump_float(img, args.output, args.format)
    return 0


def _cmd_info(args):
    kind = formats.sniff_kind(args.path)
    if kind == "hdrl":
        with open(args.path, "rb") as fh:
            report = layered.stream_info(fh.read())
        report = {"path": args.path, "format": "hdrl", **report}
        report["planes"] = ",".join(report["planes"]) if not args.json else report["planes"]
        _emit(report, args.json)
        return 0
    img = formats.load(args.path, kind)
    report = {"path": args.path, "format": kind,
              "width": img.width, "height": img.height}
    if isinstance(img, HdrImage):
        lum = luminance(img)
        report.update(calibration=img.calibration.value,
                      min_luminance=float(lum.min()),
                      max_luminance=float(lum.max()),
                      mean_luminance=float(lum.mean()))
    else:
        report.update(transfer=img.transfer_tag,
                      min_code=int(img.data.min()),
                      max_code=int(img.data.max()))
    _emit(report, args.json)
    return 0


def _cmd_merge(args):
    stack = load_stack_manifest(args.stack, formats.load)
    if args.align:
        stack, _ = align_global(stack)
    if args.response:
        curve = ResponseCurve.load(args.response)
    elif len(stack) >= 2:
        curve = estimate_response(stack, lam=args.smoothness,
                                  sample_count=args.samples, seed=args.seed)
    else:
        curve = ResponseCurve.linear()
    img, mask = merge_stack(stack, curve)
    if args.save_response:
        _atomic_write(args.save_response, curve.to_text().encode("ascii"))
    _dump_float(img, args.output)
    _emit({"output": args.output,
           "frames": len(stack),
           "saturated_fraction": float(np.count_nonzero(mask)) / mask.size}, False)
    return 0


def _cmd_tonemap(args):
    img = _load_float(args.input)
    if args.op == "global":
        result = tonemap_global(img, key=args.key, white=args.white)
    else:
        result = tonemap_local(img, sigma_spatial=args.sigma_spatial,
                               sigma_range=args.sigma_range,
                               base_contrast=args.base_contrast,
                               threads=args.threads)
    formula = {"eq3": "ratio", "eq4": "linear"}[args.formula]
    transfer = TransferFunction.from_name(args.transfer)
    result.finish(saturation=_parse_saturation(args.saturation),
                  formula=formula, transfer=transfer)
    if formats.sniff_kind(args.output) != "ppm":
        raise _UsageError(f"tonemap output {args.output!r} must be a .ppm file")
    _atomic_write(args.output, formats.write_ppm(result.sdr))
    _emit({"output": args.output,
           "clip_fraction": result.clip_fraction}, False)
    return 0


def _cmd_expand(args):
    kind = formats.sniff_kind(args.input)
    if kind != "ppm":
        raise _UsageError(f"expand input {args.input!r} must be a .ppm file")
    sdr = formats.load(args.input, kind)
    params = ExpansionParams(peak=args.peak, alpha=args.alpha,
                             linearizer=_parse_linearizer(args.linearizer),
                             prefilter=args.prefilter)
    img, mask = expand(sdr, params, threads=args.threads)
    _dump_float(img, args.output)
    _emit({"output": args.output,
           "unreliable_fraction": float(np.count_nonzero(mask)) / mask.size}, False)
    return 0


def _cmd_compare(args):
    ref = _load_float(args.reference, "reference")
    test = _load_float(args.test, "test")
    report = quality.compare(ref, test, args.metric, nits=args.nits)
    if args.metric == "dri" and args.maps:
        ref_c = quality.calibrate(ref, args.nits) if args.nits else ref
        test_c = quality.calibrate(test, args.nits) if args.nits else test
        dm = dri_classify(ref_c, test_c)
        n_bands = dm.labels.shape[0] * dm.labels.shape[1]
        for code, name in ((dm.LOSS, "loss"), (dm.AMPLIFICATION, "amplification"),
                           (dm.REVERSAL, "reversal")):
            frac = (dm.labels == code).sum(axis=(0, 1)) / float(n_bands)
            raster = np.repeat(frac[..., None], 3, axis=2)
            path = f"{args.maps}.{name}.pfm"
            _atomic_write(path, formats.write_pfm(HdrImage(raster)))
            report[f"map_{name}"] = path
    _emit(report, args.json)
    return 0


def _cmd_pack(args):
    img = _load_float(args.input)
    data = layered.pack_bytes(img, mode=args.mode)
    _atomic_write(args.output, data)
    _emit({"output": args.output, "bytes": len(data), "mode": args.mode}, False)
    return 0


def _cmd_unpack(args):
    with open(args.input, "rb") as fh:
        data = fh.read()
    if args.base_only:
        sdr = layered.read_base_bytes(data)
        if formats.sniff_kind(args.output) != "ppm":
            raise _UsageError("base layer output must be a .ppm file")
        _atomic_write(args.output, formats.write_ppm(sdr))
    else:
        img = layered.unpack_bytes(data)
        _dump_float(img, args.output)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="hdrkit",
                     description="HDR imaging toolkit: merge, tone map, expand, "
                                 "compare, and pack high dynamic range images.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("convert", help="convert between floating-point image formats")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=("hdr", "xyze", "pfm"),
                   help="output format override (default: by extension)")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("info", help="print image dimensions and statistics")
    p.add_argument("path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("merge", help="merge a bracketed exposure stack")
    p.add_argument("--stack", required=True,
                   help="manifest: one 'path exposure_time_seconds' per line")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--align", action="store_true",
                   help="correct global translation before merging")
    p.add_argument("--response", help="load a response curve instead of estimating")
    p.add_argument("--save-response", help="write the response curve used")
    p.add_argument("--smoothness", type=float, default=20.0,
                   help="second-difference penalty on the response fit")
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("tonemap", help="compress an HDR image for 8-bit display")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--op", choices=("global", "local"), default="global")
    p.add_argument("--key", type=float, default=0.18)
    p.add_argument("--white", type=float, default=None)
    p.add_argument("--sigma-spatial", type=float, default=8.0)
    p.add_argument("--sigma-range", type=float, default=0.4)
    p.add_argument("--base-contrast", type=float, default=1.6)
    p.add_argument("--saturation", default="auto", metavar="{auto,<p>}")
    p.add_argument("--formula", choices=("eq3", "eq4"), default="eq3",
                   help="chroma reattachment: power ratio (eq3) or luminance-"
                        "preserving linear (eq4)")
    p.add_argument("--transfer", default="srgb",
                   choices=("gamma22", "srgb", "pq", "log", "pu"))
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_tonemap)

    p = sub.add_parser("expand", help="expand an 8-bit image to HDR")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--peak", type=float, default=1000.0, help="target peak, nits")
    p.add_argument("--alpha", type=float, default=1.0, help="luminance exponent")
    p.add_argument("--linearizer", default="srgb", metavar="{srgb,gamma22,crf:<file>}")
    p.add_argument("--prefilter", action="store_true",
                   help="edge-aware smoothing before expansion")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("compare", help="fidelity metrics between two HDR images")
    p.add_argument("reference")
    p.add_argument("test")
    p.add_argument("--metric", required=True,
                   choices=("pu-psnr", "log-psnr", "pu-ssim", "dri"))
    p.add_argument("--nits", type=float, default=None,
                   help="peak nits used to promote relative inputs to absolute")
    p.add_argument("--maps", help="path prefix for per-category band maps (PFM)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("pack", help="write a layered base+extension stream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--mode", choices=layered.MODES, default="lossy16")
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("unpack", help="decode a layered stream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--base-only", action="store_true",
                   help="extract just the 8-bit base layer")
    p.set_defaults(func=_cmd_unpack)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except HdrkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
