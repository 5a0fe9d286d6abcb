from __future__ import annotations

import argparse
import copy
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src import __version__
from src.analysis import core_pairs, distortion_report, partial_report, scaling_curve, subspace_pairs
from src.decomposition import build_partition_bundle, bundle_report
from src.embedding import partial_ramsey_embed, ramsey_embed, scaling_ramsey_embed
from src.errors import GuaranteeViolation, InputError, InvalidParameters
from src.fixtures import fixture_from_dict, generate, parse_fixture, random_weights
from src.lp_embedding import deterministic_lp_embed, lp_report
from src.metric import MetricSpace, WeightFunction, load_metric, save_metric
from src.multi import MultiEmbedding, build_multi_embedding, path_distortion_report
from src.oracle import (
    BuilderSpec,
    audit_oracle,
    build_cover,
    oracle_bench,
    oracle_build,
    oracle_load,
    oracle_query,
    oracle_save,
    oracle_stats,
)
from src.ramsey import ScalingSchedule, lq_bound, partial_ramsey, ramsey_subspace, scaling_ramsey
from src.storage import append_log, print_json, read_coordinates, write_artifact, write_bench, write_coordinates, write_manifest
from src.ultrametric import tree_from_dict
from src.utils import TimeConfig, load_yaml, read_json
from src.verify import verify_artifact

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2

DEFAULT_CONFIG: Dict[str, Any] = {
    "runtime": {"tz": "Asia/Seoul", "log_level": "INFO", "run_log_dir": "out/logs"},
    "defaults": {"t": 2, "delta": 0.5, "epsilon": 0.1, "schedule": "square", "p": 2, "q": [1, 2, 4]},
    "verification": {"rtol": 1e-9, "exhaustive_limit": 256, "hst_exhaustive_limit": 64, "hst_samples": 20000},
    "sampler": {"count": 100, "max_len": 5, "seed": 1},
    "bench": {
        "sizes": [16, 64, 256, 1024],
        "fixture": "planar",
        "seed": 7,
        "sample_pairs": 100000,
        "exhaustive_limit": 256,
    },
    "corpus": [
        {"kind": "uniform", "n": 16},
        {"kind": "path", "n": 16},
        {"kind": "clusters", "k": 4, "m": 4, "s": 10},
        {"kind": "planar", "n": 64, "seed": 1},
        {"kind": "graph", "n": 64, "seed": 1},
        {"kind": "planar", "n": 256, "seed": 2},
    ],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse 기본 동작(exit 2)을 막고 사용법 오류를 exit 1 로 돌린다."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[Path]) -> Dict[str, Any]:
    if path is None or not Path(path).exists():
        return copy.deepcopy(DEFAULT_CONFIG)
    return _merge(DEFAULT_CONFIG, load_yaml(Path(path)))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, default=Path("conf.yml"))
    common.add_argument("--log-dir", type=Path, default=None)
    common.add_argument("--tz", default=None)
    common.add_argument("--log-level", default=None)
    return common


def _builder_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--builder", choices=("basic", "partial", "scaling"), default="basic")
    parser.add_argument("--t", type=int, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--schedule", default=None)


def _input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", type=Path, required=True)
    parser.add_argument("--strict", action="store_true", help="O(n^3) 삼각부등식 검사")
    parser.add_argument("--weights-seed", type=int, default=None, help="정수 가중치 [1,16] 난수 시드")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="cli.py", description="deterministic metric Ramsey toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", parents=[common], help="픽스처 거리행렬 생성")
    source = gen.add_mutually_exclusive_group(required=True)
    source.add_argument("--fixture", nargs="+")
    source.add_argument("--corpus", action="store_true", help="설정 corpus 의 픽스처를 --out 디렉터리에 모두 생성")
    gen.add_argument("--out", type=Path, required=True)

    ramsey = commands.add_parser("ramsey", parents=[common])
    _input_flags(ramsey)
    ramsey.add_argument("--t", type=int, default=None)
    ramsey.add_argument("--out", type=Path, required=True)

    partial = commands.add_parser("partial", parents=[common])
    _input_flags(partial)
    partial.add_argument("--delta", type=float, default=None)
    partial.add_argument("--epsilon", type=float, default=None)
    partial.add_argument("--out", type=Path, required=True)

    scaling = commands.add_parser("scaling", parents=[common])
    _input_flags(scaling)
    scaling.add_argument("--delta", type=float, default=None)
    scaling.add_argument("--schedule", default=None)
    scaling.add_argument("--out", type=Path, required=True)

    embed = commands.add_parser("embed", parents=[common])
    _input_flags(embed)
    _builder_flags(embed)
    embed.add_argument("--out", type=Path, required=True)

    cover = commands.add_parser("cover", parents=[common])
    _input_flags(cover)
    _builder_flags(cover)
    cover.add_argument("--out", type=Path, required=True)

    oracle = commands.add_parser("oracle")
    actions = oracle.add_subparsers(dest="action", required=True)
    build = actions.add_parser("build", parents=[common])
    _input_flags(build)
    _builder_flags(build)
    build.add_argument("--out", type=Path, required=True)
    query = actions.add_parser("query", parents=[common])
    query.add_argument("directory", type=Path)
    query.add_argument("x", type=int)
    query.add_argument("y", type=int)
    bench = actions.add_parser("bench", parents=[common])
    _builder_flags(bench)
    bench.add_argument("--sizes", type=int, nargs="+", default=None)
    bench.add_argument("--fixture", default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--sample-pairs", type=int, default=None)
    bench.add_argument("--out", type=Path, required=True)

    multi = commands.add_parser("multiembed", parents=[common])
    _input_flags(multi)
    multi.add_argument("--epsilon", type=float, default=None)
    multi.add_argument("--paths", type=int, default=None)
    multi.add_argument("--max-len", type=int, default=None)
    multi.add_argument("--seed", type=int, default=None)
    multi.add_argument("--out", type=Path, required=True)

    bundle = commands.add_parser("bundle", parents=[common])
    _input_flags(bundle)
    bundle.add_argument("--scale", type=float, required=True, help="클러스터 지름 상한 Δ̂")
    bundle.add_argument("--delta", type=float, default=None)
    bundle.add_argument("--out", type=Path, required=True)

    lp = commands.add_parser("lpembed", parents=[common])
    _input_flags(lp)
    lp.add_argument("--p", type=float, default=None)
    lp.add_argument("--delta", type=float, default=None)
    lp.add_argument("--out", type=Path, required=True, help="좌표 CSV (보고서는 같은 이름의 .json)")

    analyze = commands.add_parser("analyze", parents=[common])
    analyze.add_argument("--in", dest="input", type=Path, required=True, help="산출물 JSON 또는 오라클 디렉터리")
    analyze.add_argument("--metric", type=Path, required=True)
    analyze.add_argument("--q", type=float, nargs="+", default=None)
    analyze.add_argument("--epsilon", type=float, default=None)
    analyze.add_argument("--out", type=Path, default=None)

    verify = commands.add_parser("verify", parents=[common])
    verify.add_argument("--in", dest="input", type=Path, required=True, help="산출물 JSON 또는 오라클 디렉터리")
    verify.add_argument("--metric", type=Path, required=True)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

class Run:
    """명령 하나의 설정/로그/타이밍 묶음."""

    def __init__(self, args: argparse.Namespace, config: Dict[str, Any]) -> None:
        self.args = args
        self.config = config
        runtime = config["runtime"]
        self.tz_name = args.tz or runtime["tz"]
        self.log_dir = args.log_dir or Path(runtime["run_log_dir"])
        self.ts = TimeConfig.from_name(self.tz_name).now()
        self.rtol = float(config["verification"]["rtol"])
        self.timings: Dict[str, float] = {}
        self.name = args.command if getattr(args, "action", None) is None else f"{args.command} {args.action}"

    def default(self, key: str, value: Any) -> Any:
        return self.config["defaults"][key] if value is None else value

    def log(self, event: str, payload: Dict[str, Any]) -> None:
        append_log(self.ts, event, {"command": self.name, **payload}, log_dir=self.log_dir, tz_name=self.tz_name)

    def timed(self, label: str, func: Callable[[], Any]) -> Any:
        started = time.perf_counter()
        result = func()
        self.timings[label] = time.perf_counter() - started
        return result

    def metric(self) -> Tuple[MetricSpace, Optional[WeightFunction]]:
        space = self.timed("load", lambda: load_metric(self.args.input, strict=getattr(self.args, "strict", False)))
        seed = getattr(self.args, "weights_seed", None)
        weights = None if seed is None else WeightFunction(random_weights(space.n, seed))
        return space, weights

    def builder(self) -> BuilderSpec:
        a = self.args
        return BuilderSpec(
            kind=a.builder,
            t=int(self.default("t", a.t)),
            delta=float(self.default("delta", a.delta)),
            epsilon=float(self.default("epsilon", a.epsilon)),
            schedule=str(self.default("schedule", a.schedule)),
        )

    def finish(self, artifact: Path, payload: Optional[Dict[str, Any]], source: Dict[str, Any], params: Dict[str, Any], outputs: Optional[List[Path]] = None, seed: Optional[int] = None) -> None:
        if payload is not None:
            write_artifact(artifact, payload)
        manifest = write_manifest(artifact, self.name, source, params, seed, outputs or [artifact], self.timings)
        self.log("artifact", {"path": str(artifact), "manifest": str(manifest)})


def _with_weights(payload: Dict[str, Any], weights: Optional[WeightFunction]) -> Dict[str, Any]:
    if weights is not None:
        payload["weights"] = weights.values.tolist()
    return payload


def _load_oracle_or_payload(path: Path) -> Tuple[str, Any]:
    if path.is_dir():
        return "oracle", oracle_load(path)
    if not path.exists():
        raise InvalidParameters(f"{path} does not exist")
    return "payload", read_json(path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(run: Run) -> int:
    if run.args.corpus:
        specs = [fixture_from_dict(entry) for entry in run.config["corpus"]]
        targets = [(spec, run.args.out / f"{spec.slug()}.csv") for spec in specs]
    else:
        targets = [(parse_fixture(run.args.fixture), run.args.out)]
    for spec, path in targets:
        space = run.timed(spec.slug(), lambda: generate(spec))
        save_metric(space, path)
        run.finish(path, None, space.provenance, spec.describe(), seed=spec.seed)
    return EXIT_OK


def cmd_ramsey(run: Run) -> int:
    space, weights = run.metric()
    t = int(run.default("t", run.args.t))
    result = run.timed("build", lambda: ramsey_subspace(space, t, weights, rtol=run.rtol))
    run.finish(run.args.out, _with_weights(result.to_dict(), weights), space.provenance, {"t": t, "weights_seed": run.args.weights_seed}, seed=run.args.weights_seed)
    return EXIT_OK


def cmd_partial(run: Run) -> int:
    space, weights = run.metric()
    delta = float(run.default("delta", run.args.delta))
    eps = float(run.default("epsilon", run.args.epsilon))
    result = run.timed("build", lambda: partial_ramsey(space, delta, eps, weights, rtol=run.rtol))
    params = {"delta": delta, "epsilon": eps, "weights_seed": run.args.weights_seed}
    run.finish(run.args.out, _with_weights(result.to_dict(), weights), space.provenance, params, seed=run.args.weights_seed)
    return EXIT_OK


def cmd_scaling(run: Run) -> int:
    space, weights = run.metric()
    delta = float(run.default("delta", run.args.delta))
    schedule = ScalingSchedule.from_name(run.default("schedule", run.args.schedule))
    result = run.timed("build", lambda: scaling_ramsey(space, delta, schedule, weights, rtol=run.rtol))
    params = {"delta": delta, "schedule": schedule.name, "weights_seed": run.args.weights_seed}
    run.finish(run.args.out, _with_weights(result.to_dict(), weights), space.provenance, params, seed=run.args.weights_seed)
    return EXIT_OK


def cmd_embed(run: Run) -> int:
    space, weights = run.metric()
    builder = run.builder()
    if builder.kind == "basic":
        result = run.timed("build", lambda: ramsey_embed(space, builder.t, weights, rtol=run.rtol))
    elif builder.kind == "partial":
        result = run.timed("build", lambda: partial_ramsey_embed(space, builder.delta, builder.epsilon, weights, rtol=run.rtol))
    else:
        schedule = ScalingSchedule.from_name(builder.schedule)
        result = run.timed("build", lambda: scaling_ramsey_embed(space, builder.delta, schedule, weights, rtol=run.rtol))
    run.finish(run.args.out, _with_weights(result.to_dict(), weights), space.provenance, builder.to_dict(), seed=run.args.weights_seed)
    return EXIT_OK


def cmd_cover(run: Run) -> int:
    space, weights = run.metric()
    builder = run.builder()
    cover = run.timed("build", lambda: build_cover(space, builder, weights, rtol=run.rtol))
    run.finish(run.args.out, _with_weights(cover.to_dict(), weights), space.provenance, builder.to_dict(), seed=run.args.weights_seed)
    return EXIT_OK


def cmd_oracle(run: Run) -> int:
    action = run.args.action
    if action == "query":
        oracle = oracle_load(run.args.directory)
        answer = oracle_query(oracle, run.args.x, run.args.y)
        print(f"{answer:.17g}")
        run.log("query", {"x": run.args.x, "y": run.args.y, "answer": answer})
        return EXIT_OK
    builder = run.builder()
    if action == "build":
        space, weights = run.metric()
        oracle = run.timed("build", lambda: oracle_build(space, builder, weights, rtol=run.rtol))
        written = oracle_save(oracle, run.args.out)
        run.finish(run.args.out, None, space.provenance, builder.to_dict(), outputs=written, seed=run.args.weights_seed)
        return EXIT_OK
    bench = run.config["bench"]
    sizes = run.args.sizes or bench["sizes"]
    fixture = run.args.fixture or bench["fixture"]
    seed = run.args.seed if run.args.seed is not None else bench["seed"]
    sample_pairs = run.args.sample_pairs or bench["sample_pairs"]
    rows = run.timed(
        "bench",
        lambda: oracle_bench(
            sizes,
            builder,
            fixture=fixture,
            seed=seed,
            sample_pairs=sample_pairs,
            exhaustive_limit=int(bench["exhaustive_limit"]),
            rtol=run.rtol,
        ),
    )
    written = write_bench(rows, run.args.out)
    params = {"sizes": list(sizes), "fixture": fixture, "sample_pairs": sample_pairs, **builder.to_dict()}
    run.finish(written[0], None, {"kind": "fixture", "fixture": fixture}, params, outputs=written, seed=seed)
    failed = [row["n"] for row in rows if not row["audit_ok"]]
    if failed:
        print(f"oracle audit failed for n={failed}", file=sys.stderr)
        run.log("violation", {"rule": "oracle-audit", "sizes": failed})
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_multiembed(run: Run) -> int:
    space, weights = run.metric()
    sampler = run.config["sampler"]
    eps = float(run.default("epsilon", run.args.epsilon))
    count = run.args.paths if run.args.paths is not None else sampler["count"]
    max_len = run.args.max_len if run.args.max_len is not None else sampler["max_len"]
    seed = run.args.seed if run.args.seed is not None else sampler["seed"]
    me = run.timed("build", lambda: build_multi_embedding(space, eps, weights, rtol=run.rtol))
    report = run.timed("paths", lambda: path_distortion_report(me, space, count=count, max_len=max_len, seed=seed, rtol=run.rtol))
    payload = _with_weights(me.to_dict(), weights)
    payload["paths"] = report
    params = {"epsilon": eps, "paths": count, "max_len": max_len}
    run.finish(run.args.out, payload, space.provenance, params, seed=seed)
    return EXIT_OK


def cmd_bundle(run: Run) -> int:
    space, weights = run.metric()
    delta = float(run.default("delta", run.args.delta))
    bundle = run.timed("build", lambda: build_partition_bundle(space, run.args.scale, delta, weights, rtol=run.rtol))
    payload = bundle.to_dict()
    payload.update({"artifact": "bundle", "report": bundle_report(space, bundle)})
    run.finish(run.args.out, payload, space.provenance, {"scale": run.args.scale, "delta": delta}, seed=run.args.weights_seed)
    return EXIT_OK


def cmd_lpembed(run: Run) -> int:
    space, weights = run.metric()
    p = float(run.default("p", run.args.p))
    delta = float(run.default("delta", run.args.delta))
    embedding = run.timed("build", lambda: deterministic_lp_embed(space, p, delta, weights, rtol=run.rtol))
    write_coordinates(embedding.coords, run.args.out)
    report_path = run.args.out.with_suffix(".json")
    payload = embedding.to_dict()
    payload["report"] = lp_report(space, embedding)
    write_artifact(report_path, payload)
    run.finish(run.args.out, None, space.provenance, {"p": p, "delta": delta}, outputs=[run.args.out, report_path], seed=run.args.weights_seed)
    return EXIT_OK


def _analyze_payload(run: Run, payload: Dict[str, Any], space: MetricSpace, q_list: Sequence[float], eps: float) -> Dict[str, Any]:
    artifact = payload.get("artifact")
    if artifact == "multi":
        me = MultiEmbedding(tree=tree_from_dict(payload), eps=float(payload["epsilon"]), t=int(payload["t"]), n=int(payload["n"]))
        sampler = run.config["sampler"]
        return path_distortion_report(me, space, count=sampler["count"], max_len=sampler["max_len"], seed=sampler["seed"], rtol=run.rtol)
    if artifact not in ("ramsey", "embedding"):
        raise InvalidParameters(f"cannot analyze artifact type {artifact!r}")
    tree = tree_from_dict(payload)
    accessor = tree.point_distance
    if artifact == "ramsey":
        pairs, universe = subspace_pairs(payload["subspace"]), "subspace"
    else:
        pairs, universe = [p for p in core_pairs(space.n, payload["core"]) if p[0] in tree.leaves_of and p[1] in tree.leaves_of], "core×X"
    report: Dict[str, Any] = {
        "distortion": distortion_report(space, accessor, q_list, non_contractive=True, pairs=pairs, universe=universe, rtol=run.rtol).to_dict(),
    }
    if pairs and 0 < eps < 1:
        report["partial"] = partial_report(space, accessor, eps, pairs=pairs)
    if payload.get("kind") == "scaling":
        schedule_info = payload["params"]["schedule"]
        schedule = ScalingSchedule.from_name(schedule_info["name"], p=schedule_info.get("p"))
        delta = float(payload["params"]["delta"])
        weights = None if payload.get("weights") is None else WeightFunction(np.asarray(payload["weights"], dtype=np.float64))
        report["scaling_curve"] = scaling_curve(space, accessor, weights, pairs=pairs).to_dict()["steps"]
        report["lq_bound"] = {str(q): lq_bound(schedule, delta, q) for q in q_list}
    return report


def cmd_analyze(run: Run) -> int:
    space = run.timed("load", lambda: load_metric(run.args.metric))
    q_list = run.args.q or run.config["defaults"]["q"]
    eps = float(run.default("epsilon", run.args.epsilon))
    kind, loaded = _load_oracle_or_payload(run.args.input)
    if kind == "oracle":
        report = run.timed("analyze", lambda: oracle_stats(loaded, space))
    else:
        report = run.timed("analyze", lambda: _analyze_payload(run, loaded, space, q_list, eps))
    print_json(report)
    if run.args.out is not None:
        run.finish(run.args.out, report, space.provenance, {"q": list(q_list), "epsilon": eps})
    return EXIT_OK


def cmd_verify(run: Run) -> int:
    space = run.timed("load", lambda: load_metric(run.args.metric))
    verification = run.config["verification"]
    kind, loaded = _load_oracle_or_payload(run.args.input)
    if kind == "oracle":
        audit = audit_oracle(loaded, space, exhaustive_limit=int(verification["exhaustive_limit"]), rtol=run.rtol)
        violations = [] if audit.ok else [{"rule": "oracle-audit", "detail": str(audit.to_dict())}]
    else:
        coords = None
        table = run.args.input.with_suffix(".csv")
        if loaded.get("artifact") == "lpembed" and int(loaded.get("dimension", 0)) > 0 and table.exists():
            coords = read_coordinates(table)
        found = verify_artifact(
            loaded,
            space,
            rtol=run.rtol,
            exhaustive_limit=int(verification["hst_exhaustive_limit"]),
            samples=int(verification["hst_samples"]),
            coords=coords,
        )
        violations = [item.to_dict() for item in found]
    print_json({"ok": not violations, "violations": violations})
    if violations:
        run.log("violation", {"violations": violations})
        return EXIT_VIOLATION
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Run], int]] = {
    "gen": cmd_gen,
    "ramsey": cmd_ramsey,
    "partial": cmd_partial,
    "scaling": cmd_scaling,
    "embed": cmd_embed,
    "cover": cmd_cover,
    "oracle": cmd_oracle,
    "multiembed": cmd_multiembed,
    "bundle": cmd_bundle,
    "lpembed": cmd_lpembed,
    "analyze": cmd_analyze,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE

    config = load_config(args.config)
    level = (args.log_level or config["runtime"]["log_level"]).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(asctime)s %(levelname)s %(name)s %(message)s")

    run = Run(args, config)
    run.log("start", {"argv": list(argv) if argv is not None else sys.argv[1:]})
    try:
        code = COMMANDS[args.command](run)
    except GuaranteeViolation as exc:
        # 부등식 양변을 그대로 보여준다.
        print(f"guarantee violated: {exc.rule}: {exc.lhs!r} > {exc.rhs!r} {exc.detail}", file=sys.stderr)
        run.log("violation", exc.to_dict())
        return EXIT_VIOLATION
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.log("failure", {"error": str(exc)})
        return EXIT_USAGE
    if code == EXIT_OK:
        run.log("success", {"timings": run.timings})
    return code


if __name__ == "__main__":
    sys.exit(main())
