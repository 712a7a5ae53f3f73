"""``dstforge`` command line: schema checks, corpus plumbing, training, tracking, scoring.

Every JSONL artifact starts with a ``{"_meta": {...}}`` header carrying the
command, seed and package version; JSON artifacts carry the same object
under a ``_meta`` key. Exit codes: 0 success, 1 validation failure, 2 I/O,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from dstforge import __version__
from dstforge._util import dumps_line
from dstforge.corpus import Dialogue, dump_corpus, load_corpus, split_corpus
from dstforge.decoder import DecodeConfig
from dstforge.errors import DstError, LengthMismatch, MalformedLine, SchemaInvalid, SpecInvalid
from dstforge.generator import (
    CHARACTER,
    WHITESPACE,
    ExternalGenerator,
    NGramModel,
    Tokenizer,
    Vocab,
    scaffold_atoms,
    train_ngram,
)
from dstforge.generator.ngram import SMOOTHING
from dstforge.metrics import evaluate
from dstforge.pretrain import labeled_from_corpus, select_pretrain_turns, train_classifier
from dstforge.prompt import Strategy, build_finetune_examples, build_pretrain_example, schema_texts
from dstforge.schema import DialogueState, SchemaDef, load_schema
from dstforge.synth import SynthSpec, generate
from dstforge.tracker import Tracker, TurnResult, accumulate, gold_results, lint, replay_generator

SEED_ENV = "DSTFORGE_SEED"
DEFAULT_SEED = 42
SHIPPED_SCHEMAS = ("en", "zh")


# ---------------------------------------------------------------- helpers


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise SpecInvalid(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _meta(command: str, seed: int, **extra) -> dict:
    return {"command": command, "seed": seed, "version": __version__, **extra}


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as f:
        return f.read()


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _jsonl(rows: Sequence[dict], meta: dict) -> str:
    return dumps_line({"_meta": meta}) + "".join(dumps_line(r) for r in rows)


def _read_jsonl(path: str) -> list[dict]:
    rows = []
    for line_no, line in enumerate(_read(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, str(exc)) from exc
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, "expected a JSON object")
        if "_meta" not in obj:
            rows.append(obj)
    return rows


def load_schema_arg(value: str) -> SchemaDef:
    """A schema path, or ``en``/``zh`` for a shipped schema when no such file exists."""
    if value in SHIPPED_SCHEMAS and not os.path.exists(value):
        from dstforge import shipped_schema

        return shipped_schema(value)
    with open(value, "rb") as f:
        return load_schema(f.read())


def _load_corpus(path: str, schema: Optional[SchemaDef] = None) -> list[Dialogue]:
    return load_corpus(_read(path), schema)


def _read_examples(path: str) -> list[tuple[str, str]]:
    out = []
    for i, row in enumerate(_read_jsonl(path), start=1):
        if not isinstance(row.get("input"), str) or not isinstance(row.get("answer"), str):
            raise MalformedLine(i, "example needs string 'input' and 'answer'")
        out.append((row["input"], row["answer"]))
    return out


def _finetune_pairs(dialogues: Sequence[Dialogue], schema: SchemaDef, strategy: Strategy) -> list[tuple[str, str]]:
    return [ex for d in dialogues if d.annotations for ex in build_finetune_examples(d, schema, strategy)]


# ---------------------------------------------------------------- generator spec


@dataclass
class TrackConfig:
    """Everything a (possibly remote) worker needs to rebuild the tracker."""

    schema: str
    generator: str
    corpus: str
    strategy: str = Strategy.DIALOGUE_STYLE.value
    vocab: Optional[str] = None
    mode: str = CHARACTER
    decode: dict = field(default_factory=dict)
    unconstrained: bool = False
    trace: bool = False


def _load_vocab(path: str) -> Vocab:
    data = json.loads(_read(path))
    if isinstance(data, dict) and "vocab" in data and "tokens" not in data:
        data = data["vocab"]
    try:
        return Vocab.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise SpecInvalid(f"{path} holds no vocabulary ({exc})") from None


def parse_generator_spec(spec: str) -> tuple[str, str]:
    kind, _, arg = spec.partition(":")
    if kind == "oracle" or (kind in ("ngram", "external") and arg):
        return kind, arg
    raise SpecInvalid(f"invalid generator spec {spec!r}; expected oracle[:GOLD], ngram:MODEL or external:COMMAND")


def build_generator(spec: str, schema: SchemaDef, strategy: Strategy, corpus: Sequence[Dialogue],
                    vocab_path: Optional[str] = None, mode: str = CHARACTER):
    kind, arg = parse_generator_spec(spec)
    if kind == "oracle":
        gold = _load_corpus(arg, schema) if arg else corpus
        if not any(d.annotations for d in gold):
            raise SpecInvalid("oracle generator needs an annotated corpus")
        return replay_generator(gold, schema, strategy, mode)
    if kind == "ngram":
        return NGramModel.loads(_read(arg))
    if vocab_path is None:
        raise SpecInvalid("external generator needs --vocab")
    return ExternalGenerator(shlex.split(arg), _load_vocab(vocab_path))


_WORKER: dict = {}


def _init_worker(cfg: TrackConfig) -> None:
    schema = load_schema_arg(cfg.schema)
    strategy = Strategy(cfg.strategy)
    corpus = _load_corpus(cfg.corpus, None)
    gen = build_generator(cfg.generator, schema, strategy, corpus, cfg.vocab, cfg.mode)
    _WORKER["generator"] = gen
    _WORKER["traces"] = []
    sink = _WORKER["traces"].append if cfg.trace else None
    _WORKER["tracker"] = Tracker(schema, gen, strategy, DecodeConfig(**cfg.decode), cfg.unconstrained, sink)


def _track_one(raw: dict) -> tuple[list[dict], list[dict]]:
    d = load_corpus(dumps_line(raw))[0]
    tracker: Tracker = _WORKER["tracker"]
    traces = _WORKER["traces"]
    results, steps = [], []
    for t in d.patient_turns():
        start = len(traces)
        results.append(tracker.track_turn(d, t))
        steps += [{"dialogue_id": d.id, "turn": t, **tr} for tr in traces[start:]]
        del traces[start:]
    return [_result_row(r) for r in results], steps


def _result_row(r: TurnResult) -> dict:
    return {"dialogue_id": r.dialogue_id, "turn": r.turn, "intents": sorted(r.intents),
            "delta": r.delta.slot_dict(), "queries_run": r.queries_run, "flags": list(r.flags)}


def run_tracking(cfg: TrackConfig, dialogues: Sequence[Dialogue], jobs: int = 1) -> tuple[list[dict], list[dict]]:
    """Track every patient turn; rows and traces come back ordered by dialogue id."""
    ordered = sorted(dialogues, key=lambda d: d.id)
    payload = [d.unlabeled().to_dict() for d in ordered]
    rows: list[dict] = []
    traces: list[dict] = []
    if jobs <= 1:
        _init_worker(cfg)
        try:
            outs = [_track_one(p) for p in payload]
        finally:
            _close_worker()
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            outs = list(pool.map(_track_one, payload, chunksize=max(1, len(payload) // (4 * jobs))))
    for r, s in outs:
        rows += r
        traces += s
    return rows, traces


def _close_worker() -> None:
    gen = _WORKER.pop("generator", None)
    if hasattr(gen, "close"):
        gen.close()
    _WORKER.clear()


# ---------------------------------------------------------------- commands


def cmd_schema_check(args) -> int:
    try:
        schema = load_schema_arg(args.schema)
    except SchemaInvalid as exc:
        for v in exc.violations:
            print(v)
        return 1
    n_slots = sum(len(s) for s in schema.fields.values())
    print(f"ok: {len(schema.fields)} fields, {n_slots} slots")
    return 0


def cmd_split(args) -> int:
    seed = resolve_seed(args.seed)
    dialogues = _load_corpus(args.corpus)
    parts = split_corpus(dialogues, args.ratios, seed)
    names = args.names or ["train", "dev", "test"][: len(parts)]
    if len(names) != len(parts):
        raise SpecInvalid(f"{len(parts)} ratios but {len(names)} names")
    for name, part in zip(names, parts):
        path = os.path.join(args.out_dir, f"{name}.jsonl")
        _write(path, dump_corpus(part, _meta("split", seed, part=name, ratios=list(args.ratios))))
        print(f"{path}: {len(part)} dialogues")
    return 0


def cmd_examples(args) -> int:
    seed = resolve_seed(args.seed)
    schema = load_schema_arg(args.schema)
    pairs = _finetune_pairs(_load_corpus(args.corpus, schema), schema, Strategy(args.strategy))
    rows = [{"input": i, "answer": a} for i, a in pairs]
    _write(args.out, _jsonl(rows, _meta("examples", seed, strategy=args.strategy)))
    return 0


def cmd_pretrain(args) -> int:
    seed = resolve_seed(args.seed)
    labeled = labeled_from_corpus(_load_corpus(args.labeled))
    clf = train_classifier(labeled, threshold=args.threshold)
    unlabeled = _load_corpus(args.unlabeled)
    chosen = select_pretrain_turns(unlabeled, clf, tuple(args.ratio), seed, args.size)
    rows = []
    for d, t, source in chosen:
        inp, ans = build_pretrain_example(d, t)
        rows.append({"input": inp, "answer": ans, "source": source, "dialogue_id": d.id, "turn": t})
    n_desc = sum(r["source"] == "descriptive" for r in rows)
    meta = _meta("pretrain", seed, ratio=list(args.ratio), descriptive=n_desc, random=len(rows) - n_desc)
    _write(args.out, _jsonl(rows, meta))
    if args.classifier_out:
        _write(args.classifier_out, clf.dumps(_meta("pretrain", seed, threshold=args.threshold)))
    print(f"{len(rows)} pretrain examples ({n_desc} descriptive, {len(rows) - n_desc} random)", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    seed = resolve_seed(args.seed)
    schema = load_schema_arg(args.schema) if args.schema else None
    examples: list[tuple[str, str]] = []
    for path in args.examples or ():
        examples += _read_examples(path)
    if args.corpus:
        if schema is None:
            raise SpecInvalid("--corpus needs --schema")
        examples += _finetune_pairs(_load_corpus(args.corpus, schema), schema, Strategy(args.strategy))
    extra: list[str] = []
    if schema is not None:
        extra += schema_texts(schema)
    for path in args.vocab_from or ():
        extra += [t for ex in _read_examples(path) for t in ex]
    base = NGramModel.loads(_read(args.base)) if args.base else None
    atoms = scaffold_atoms(schema.answer_pattern if schema else None)
    model = train_ngram(
        examples,
        n=args.n if args.n is not None else (base.order if base else 4),
        k=args.k,
        stage=args.stage,
        base=base,
        weight=args.weight,
        extra_texts=extra,
        mode=args.mode,
        atomic=atoms,
        smoothing=args.smoothing,
        copy_boost=args.copy_boost,
        copy_window=args.copy_window,
    )
    meta = _meta("train", seed, stage=args.stage, examples=len(examples), base=args.base)
    _write(args.out, model.dumps(meta))
    print(f"{args.out}: order {model.order}, {len(model.vocab)} tokens, {len(examples)} examples", file=sys.stderr)
    return 0


def _decode_flags(args) -> dict:
    return {
        "search": args.search,
        "beam_width": args.beam_width,
        "max_answer_tokens": args.max_answer_tokens,
        "max_values": args.max_values,
        "on_empty_valid_set": args.on_empty,
        "length_penalty": args.length_penalty,
    }


def cmd_track(args) -> int:
    seed = resolve_seed(args.seed)
    load_schema_arg(args.schema)
    kind, _ = parse_generator_spec(args.generator)
    if kind == "external" and args.vocab is None:
        raise SpecInvalid("external generator needs --vocab")
    dialogues = _load_corpus(args.corpus)
    cfg = TrackConfig(
        schema=args.schema,
        generator=args.generator,
        corpus=args.corpus,
        strategy=args.strategy,
        vocab=args.vocab,
        mode=args.mode,
        decode=_decode_flags(args),
        unconstrained=args.unconstrained,
        trace=bool(args.trace),
    )
    DecodeConfig(**cfg.decode)  # validate flags before spawning workers
    rows, traces = run_tracking(cfg, dialogues, args.jobs)
    if args.cumulative:
        _add_cumulative(rows)
    meta = _meta("track", seed, generator=args.generator, strategy=args.strategy,
                 unconstrained=args.unconstrained, decode=cfg.decode)
    _write(args.out, _jsonl(rows, meta))
    if args.trace:
        _write(args.trace, _jsonl(traces, _meta("track-trace", seed)))
    flagged = sum(1 for r in rows if r["flags"])
    print(f"{len(rows)} turns tracked, {flagged} with flags", file=sys.stderr)
    return 0


def _row_state(row: dict) -> DialogueState:
    try:
        state = DialogueState.from_dict({"intents": row.get("intents") or [], "state": row.get("delta") or {}})
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise MalformedLine(0, f"bad prediction for {row.get('dialogue_id')!r} turn {row.get('turn')}: {exc}") from None
    return state


def _add_cumulative(rows: list[dict]) -> None:
    by_dialogue: dict[str, list[dict]] = {}
    for r in rows:
        by_dialogue.setdefault(r["dialogue_id"], []).append(r)
    for group in by_dialogue.values():
        group.sort(key=lambda r: r["turn"])
        results = [TurnResult(r["turn"], set(r["intents"]), _row_state(r)) for r in group]
        for r, state in zip(group, accumulate(results)):
            r["cumulative"] = state.slot_dict()


def align_predictions(rows: Sequence[dict], gold: Sequence[Dialogue], cumulative: bool = False):
    """Pair predicted rows with gold turns by (dialogue_id, turn); both lists come back in gold order."""
    pred: dict[tuple[str, int], TurnResult] = {}
    for r in rows:
        try:
            key = (str(r["dialogue_id"]), int(r["turn"]))
        except (KeyError, TypeError, ValueError):
            raise MalformedLine(0, f"prediction row lacks dialogue_id/turn: {r!r}") from None
        if key in pred:
            raise LengthMismatch(f"duplicate prediction for {key}")
        state = _row_state(r)
        pred[key] = TurnResult(key[1], set(state.intents), state, dialogue_id=key[0])
    p_states: list[DialogueState] = []
    g_states: list[DialogueState] = []
    seen = set()
    for d in sorted(gold, key=lambda d: d.id):
        g_res = gold_results(d)
        missing = [(d.id, g.turn) for g in g_res if (d.id, g.turn) not in pred]
        if missing:
            raise LengthMismatch(f"{len(missing)} gold turns have no prediction, first {missing[0]}")
        p_res = [pred[(d.id, g.turn)] for g in g_res]
        seen.update((d.id, g.turn) for g in g_res)
        if cumulative:
            p_states += accumulate(p_res)
            g_states += accumulate(g_res)
        else:
            p_states += [DialogueState(set(r.intents), r.delta.fields) for r in p_res]
            g_states += [DialogueState(set(r.intents), r.delta.fields) for r in g_res]
    extra = sorted(set(pred) - seen)
    if extra:
        raise LengthMismatch(f"{len(extra)} predictions match no gold turn, first {extra[0]}")
    return p_states, g_states


def format_report(report: dict) -> str:
    lines = [f"{'':<14}{'P':>8}{'R':>8}{'F1':>8}{'tp':>7}{'fp':>7}{'fn':>7}"]

    def row(name, prf):
        lines.append(
            f"{name:<14}{prf['precision']:>8.4f}{prf['recall']:>8.4f}{prf['f1']:>8.4f}"
            f"{prf['tp']:>7}{prf['fp']:>7}{prf['fn']:>7}"
        )

    row("intent", report["intent"])
    row("slot", report["slot"])
    for fname, prf in report["per_field"].items():
        row(f"  {fname}", prf)
    lines.append(f"intent macro F1 {report['intent']['macro_f1']:.4f}   slot macro F1 {report['macro_f1']:.4f}")
    lines.append(f"turn accuracy {report['turn_accuracy']:.4f} over {report['turns']} turns")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    seed = resolve_seed(args.seed)
    schema = load_schema_arg(args.schema)
    gold = _load_corpus(args.gold, schema)
    rows = _read_jsonl(args.pred)
    p_states, g_states = align_predictions(rows, gold, args.cumulative)
    report = evaluate(p_states, g_states, list(schema.fields), list(schema.intents.get("patient", ())))
    report["_meta"] = _meta("eval", seed, pred=args.pred, gold=args.gold, cumulative=args.cumulative)
    if args.out:
        _write(args.out, json.dumps(report, ensure_ascii=False, indent=2) + "\n")
    sys.stdout.write(format_report(report))
    return 0


def cmd_lint(args) -> int:
    schema = load_schema_arg(args.schema)
    dialogues = _load_corpus(args.corpus, schema)
    tokenizer = Tokenizer(args.mode, scaffold_atoms(schema.answer_pattern))
    report = lint(dialogues, schema, tokenizer)
    report["_meta"] = _meta("lint", resolve_seed(args.seed), corpus=args.corpus)
    _write(args.out, json.dumps(report, ensure_ascii=False, indent=2) + "\n")
    for name, tally in sorted(report["slots"].items()):
        print(f"{name}: {tally['unreachable']}/{tally['total']} unreachable", file=sys.stderr)
    return 1 if args.strict and report["unreachable"] else 0


def cmd_synth(args) -> int:
    schema = load_schema_arg(args.schema)
    data = json.loads(_read(args.spec)) if args.spec else {}
    if not isinstance(data, dict):
        raise SpecInvalid("synth spec must be a JSON object")
    for name in ("dialogues", "template_set", "negation_rate", "multi_value_rate", "id_prefix"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.seed is not None or "seed" not in data:
        data["seed"] = resolve_seed(args.seed)
    spec = SynthSpec.from_dict(data)
    dialogues = generate(spec, schema)
    if args.unlabeled:
        dialogues = [d.unlabeled() for d in dialogues]
    _write(args.out, dump_corpus(dialogues, _meta("synth", spec.seed, spec=json.loads(spec.to_json()))))
    return 0


# ---------------------------------------------------------------- parser


def _seed_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"run seed (default ${SEED_ENV} or {DEFAULT_SEED})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dstforge", description="Generative dialogue state tracking toolkit.")
    parser.add_argument("--version", action="version", version=f"dstforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    strategies = [s.value for s in Strategy]

    p = sub.add_parser("schema-check", help="validate a schema file")
    p.add_argument("schema")
    p.set_defaults(func=cmd_schema_check)

    p = sub.add_parser("split", help="split a corpus into train/dev/test JSONL files")
    p.add_argument("corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratios", type=int, nargs="+", default=[8, 1, 1])
    p.add_argument("--names", nargs="+")
    _seed_flag(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("examples", help="write fine-tuning (input, answer) pairs")
    p.add_argument("corpus")
    p.add_argument("--schema", required=True)
    p.add_argument("--strategy", choices=strategies, default=Strategy.DIALOGUE_STYLE.value)
    p.add_argument("--out")
    _seed_flag(p)
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("pretrain", help="filter and mix unlabeled turns into a pretraining corpus")
    p.add_argument("--unlabeled", required=True)
    p.add_argument("--labeled", required=True, help="annotated corpus used to train the classifier")
    p.add_argument("--out", required=True)
    p.add_argument("--classifier-out")
    p.add_argument("--ratio", type=int, nargs=2, default=[4, 1], metavar=("DESC", "RAND"))
    p.add_argument("--size", type=int)
    p.add_argument("--threshold", type=float, default=0.5)
    _seed_flag(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="train or fine-tune an n-gram generator")
    p.add_argument("--examples", nargs="+", help="example JSONL files")
    p.add_argument("--corpus", help="annotated corpus to turn into fine-tuning examples")
    p.add_argument("--schema", help="schema (adds candidates and scaffold to the vocabulary)")
    p.add_argument("--strategy", choices=strategies, default=Strategy.DIALOGUE_STYLE.value)
    p.add_argument("--stage", choices=["pretrain", "finetune"], default="pretrain")
    p.add_argument("--base", help="base model for the finetune stage")
    p.add_argument("--n", type=int, help="order (default 4, or the base model's)")
    p.add_argument("--k", type=float, default=0.01)
    p.add_argument("--weight", type=float, default=1.0, help="multiplier on base counts")
    p.add_argument("--smoothing", choices=SMOOTHING)
    p.add_argument("--copy-boost", type=float)
    p.add_argument("--copy-window", type=int)
    p.add_argument("--mode", choices=[CHARACTER, WHITESPACE], default=CHARACTER)
    p.add_argument("--vocab-from", nargs="+", help="example files whose tokens join the vocabulary only")
    p.add_argument("--out", required=True)
    _seed_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="run the tracker over a corpus")
    p.add_argument("corpus")
    p.add_argument("--schema", required=True)
    p.add_argument("--generator", required=True, help="oracle[:GOLD], ngram:MODEL or external:COMMAND")
    p.add_argument("--vocab", help="vocab JSON for external generators (a model file works too)")
    p.add_argument("--mode", choices=[CHARACTER, WHITESPACE], default=CHARACTER, help="oracle tokenization")
    p.add_argument("--strategy", choices=strategies, default=Strategy.DIALOGUE_STYLE.value)
    p.add_argument("--search", choices=["greedy", "beam"], default="greedy")
    p.add_argument("--beam-width", type=int, default=4)
    p.add_argument("--max-answer-tokens", type=int, default=64)
    p.add_argument("--max-values", type=int, default=8)
    p.add_argument("--on-empty", choices=["emit_none", "error"], default="emit_none")
    p.add_argument("--length-penalty", type=float, default=0.0)
    p.add_argument("--unconstrained", action="store_true", help="ablation: allow the whole vocabulary")
    p.add_argument("--cumulative", action="store_true", help="also emit accumulated states")
    p.add_argument("--trace", help="write per-query decode traces to this JSONL file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _seed_flag(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score tracked turns against a gold corpus")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--schema", required=True)
    p.add_argument("--cumulative", action="store_true", help="score accumulated states instead of deltas")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry with track; scoring is serial")
    p.add_argument("--out", help="report JSON path")
    _seed_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("lint", help="count gold values the decoder can never produce")
    p.add_argument("corpus")
    p.add_argument("--schema", required=True)
    p.add_argument("--mode", choices=[CHARACTER, WHITESPACE], default=CHARACTER)
    p.add_argument("--strict", action="store_true", help="exit 1 when any value is unreachable")
    p.add_argument("--out")
    _seed_flag(p)
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p.add_argument("--schema", required=True)
    p.add_argument("--spec", help="SynthSpec JSON; flags override its fields")
    p.add_argument("--dialogues", type=int)
    p.add_argument("--template-set", choices=["latin", "cjk"])
    p.add_argument("--negation-rate", type=float)
    p.add_argument("--multi-value-rate", type=float)
    p.add_argument("--id-prefix")
    p.add_argument("--unlabeled", action="store_true", help="strip annotations")
    p.add_argument("--out")
    _seed_flag(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DstError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
