"""Deterministic synthetic annotated corpora for end-to-end runs.

Every gold value is spelled out by tokens of its own utterance, so the
latest-utterance constraint can always reach it. Body-part symptoms are
realised with words in between ("my head sometimes hurts" -> "head hurts")
to exercise discontinuous extraction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from dstforge._util import stream_rng
from dstforge.corpus import Dialogue, TurnAnnotation, Utterance
from dstforge.errors import SpecInvalid
from dstforge.schema import DialogueState, SchemaDef, ValueInstance


@dataclass(frozen=True)
class TemplateSet:
    symptoms: tuple[str, ...]
    parts: tuple[str, ...]
    preds: tuple[str, ...]
    extents: tuple[str, ...]
    diseases: tuple[str, ...]
    key_join: str
    plain_ext: tuple[str, ...]
    plain: tuple[str, ...]
    split_ext: tuple[str, ...]
    split: tuple[str, ...]
    negated: tuple[str, ...]
    split_negated: tuple[str, ...]
    disease_pos: tuple[str, ...]
    disease_neg: tuple[str, ...]
    joiners: tuple[str, ...]
    asks: tuple[str, ...]
    doctor: tuple[str, ...]
    end: str
    capitalize: bool = False


LATIN = TemplateSet(
    symptoms=(
        "cough", "fever", "nausea", "insomnia", "dizziness", "diarrhea", "rash", "fatigue",
        "constipation", "palpitations", "sneezing", "chills", "wheezing", "heartburn", "cramps", "tinnitus",
    ),
    parts=("head", "stomach", "throat", "back", "chest", "knee", "neck", "shoulder", "eye", "ear", "tooth", "ankle"),
    preds=("hurts", "aches", "itches", "burns", "throbs", "swells"),
    extents=("sometimes", "constantly", "slightly", "badly", "often", "mildly"),
    diseases=(
        "gastritis", "diabetes", "asthma", "anemia", "pneumonia", "hypertension",
        "gout", "rhinitis", "gallstones", "arthritis", "hepatitis", "bronchitis",
    ),
    key_join=" ",
    plain_ext=("I {ext} have {sym}", "recently I {ext} get {sym}"),
    plain=("I have {sym}", "I got {sym} yesterday", "I have had {sym} for days"),
    split_ext=("my {part} {ext} {pred}", "my {part} feels like it {ext} {pred}"),
    split=("my {part} {pred}", "my {part} really {pred}"),
    negated=("I do not have {sym}", "there is no {sym}"),
    split_negated=("my {part} never {pred}",),
    disease_pos=("I had {dis} before", "I had {dis}", "I was diagnosed with {dis} last year"),
    disease_neg=("I never had {dis}", "no history of {dis}"),
    joiners=(", and ", ", also "),
    asks=("Is it serious?", "What medicine should I take?", "Do I need to see a specialist?", "What causes this?"),
    doctor=(
        "Hello, what is wrong with you?",
        "Any other symptoms?",
        "How long has it lasted?",
        "Did you have any diseases before?",
        "I suggest you rest more.",
    ),
    end=".",
    capitalize=True,
)

CJK = TemplateSet(
    symptoms=(
        "咳嗽", "发烧", "恶心", "失眠", "头晕", "腹泻", "乏力", "呕吐",
        "便秘", "心慌", "气短", "盗汗", "鼻塞", "流鼻涕", "打喷嚏", "耳鸣",
    ),
    parts=("头", "肚子", "喉咙", "腰", "胸口", "膝盖", "脖子", "肩膀", "眼睛", "后背", "牙", "脚踝"),
    preds=("疼", "痒", "胀", "酸", "麻", "肿"),
    extents=("有点", "一直", "非常", "偶尔", "经常", "特别"),
    diseases=("胃炎", "高血压", "糖尿病", "肺炎", "哮喘", "贫血", "痛风", "鼻炎", "胆结石", "冠心病", "甲亢", "肾炎"),
    key_join="",
    plain_ext=("我{ext}{sym}", "最近{ext}{sym}"),
    plain=("我有{sym}", "我{sym}了", "最近{sym}"),
    split_ext=("我的{part}感到{ext}{pred}", "我{part}{ext}{pred}", "我感觉{part}{ext}{pred}"),
    split=("我的{part}感觉{pred}", "我有{part}{pred}"),
    negated=("我没有{sym}", "并没有{sym}"),
    split_negated=("我的{part}不{pred}",),
    disease_pos=("我以前得过{dis}", "我得过{dis}", "之前查出过{dis}"),
    disease_neg=("我没有得过{dis}", "我从来没有{dis}"),
    joiners=("，还", "，而且"),
    asks=("这个严重吗？", "需要吃什么药？", "要去医院检查吗？", "这是什么原因？"),
    doctor=("你好，哪里不舒服？", "还有别的症状吗？", "持续多久了？", "以前得过什么病吗？", "建议你多休息。"),
    end="。",
)

TEMPLATE_SETS = {"latin": LATIN, "cjk": CJK}


@dataclass
class SynthSpec:
    dialogues: int = 50
    patient_turns: tuple[int, int] = (2, 4)
    negation_rate: float = 0.1
    multi_value_rate: float = 0.2
    disease_rate: float = 0.2
    ask_rate: float = 0.15
    extent_rate: float = 0.5
    # sentence-final punctuation leaks into extracted values through pretraining counts
    end_punct_rate: float = 0.0
    discontinuous: bool = True
    template_set: str = "cjk"
    seed: int = 1
    id_prefix: str = "synth"
    # optional phrase overrides: symptoms/parts/preds/extents/diseases
    phrases: dict = field(default_factory=dict)

    def templates(self) -> TemplateSet:
        base = TEMPLATE_SETS[self.template_set]
        if not self.phrases:
            return base
        merged = asdict(base)
        merged.update({k: tuple(v) for k, v in self.phrases.items()})
        return TemplateSet(**merged)

    def problems(self) -> list[str]:
        out = []
        for name in ("negation_rate", "multi_value_rate", "disease_rate", "ask_rate", "extent_rate", "end_punct_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                out.append(f"{name} must lie in [0, 1]")
        lo, hi = self.patient_turns
        if self.dialogues <= 0 or lo <= 0 or hi < lo:
            out.append("dialogues and patient_turns must be positive with min <= max")
        if self.template_set not in TEMPLATE_SETS:
            out.append(f"unknown template_set {self.template_set!r}")
        unknown = set(self.phrases) - {"symptoms", "parts", "preds", "extents", "diseases"}
        if unknown:
            out.append(f"unknown phrase lists {sorted(unknown)}")
        for k, v in self.phrases.items():
            if not v:
                out.append(f"phrase list {k} is empty")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        data = dict(data)
        if "patient_turns" in data:
            data["patient_turns"] = tuple(data["patient_turns"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise SpecInvalid(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


def _check_schema(schema: SchemaDef) -> list[str]:
    out = []
    need = {"symptom": ("extent", "if_exists"), "disease": ("if_exists",)}
    for fname, children in need.items():
        if fname not in schema.fields:
            out.append(f"schema lacks field {fname}")
            continue
        names = {s.name for s in schema.child_slots(fname)}
        out.extend(f"schema lacks slot {fname}.{c}" for c in children if c not in names)
    for intent in ("describe", "ask"):
        if intent not in schema.intents.get("patient", ()):
            out.append(f"schema lacks patient intent {intent}")
    return out


def generate(spec: SynthSpec, schema: SchemaDef) -> list[Dialogue]:
    problems = spec.problems() + _check_schema(schema)
    if problems:
        raise SpecInvalid("; ".join(problems))
    tpl = spec.templates()
    rng = stream_rng(spec.seed, "synth")

    sym_items = [("plain", s) for s in tpl.symptoms]
    if spec.discontinuous:
        sym_items += [("split", (p, q)) for p in tpl.parts for q in tpl.preds]

    def symptom_clause(item) -> tuple[str, ValueInstance]:
        form, what = item
        negated = rng.random() < spec.negation_rate
        ext = None if negated or rng.random() >= spec.extent_rate else rng.choice(tpl.extents)
        if form == "plain":
            key = what
            pool = tpl.negated if negated else tpl.plain_ext if ext else tpl.plain
            clause = rng.choice(pool).format(sym=what, ext=ext)
        else:
            part, pred = what
            key = part + tpl.key_join + pred
            pool = tpl.split_negated if negated else tpl.split_ext if ext else tpl.split
            clause = rng.choice(pool).format(part=part, pred=pred, ext=ext)
        children = {"if_exists": "false" if negated else "true"}
        if ext:
            children["extent"] = ext
        return clause, ValueInstance(key, children)

    def finish(text: str) -> str:
        if tpl.capitalize:
            text = text[0].upper() + text[1:]
        return text + tpl.end if rng.random() < spec.end_punct_rate else text

    dialogues = []
    for n in range(spec.dialogues):
        k = rng.randint(*spec.patient_turns)
        unused_sym = list(sym_items)
        rng.shuffle(unused_sym)
        used_keys: set[str] = set()
        unused_dis = list(tpl.diseases)
        rng.shuffle(unused_dis)
        turns: list[Utterance] = []
        annotations: dict[int, TurnAnnotation] = {}
        for i in range(k):
            if i > 0:
                turns.append(Utterance("doctor", rng.choice(tpl.doctor)))
            state = DialogueState(fields={f: [] for f in schema.fields})
            if i > 0 and rng.random() < spec.ask_rate:
                text = rng.choice(tpl.asks)
                intents = {"ask"}
            else:
                clauses = []
                count = 2 if rng.random() < spec.multi_value_rate else 1
                for _ in range(count):
                    while unused_sym:
                        item = unused_sym.pop()
                        key = item[1] if item[0] == "plain" else tpl.key_join.join(item[1])
                        if key not in used_keys:
                            break
                    else:
                        break
                    used_keys.add(key)
                    clause, inst = symptom_clause(item)
                    clauses.append(clause)
                    state.fields["symptom"].append(inst)
                if unused_dis and rng.random() < spec.disease_rate:
                    dis = unused_dis.pop()
                    negated = rng.random() < spec.negation_rate
                    clauses.append(rng.choice(tpl.disease_neg if negated else tpl.disease_pos).format(dis=dis))
                    state.fields["disease"].append(ValueInstance(dis, {"if_exists": "false" if negated else "true"}))
                text = clauses[0]
                for clause in clauses[1:]:
                    text += rng.choice(tpl.joiners) + clause
                text = finish(text)
                intents = {"describe"}
            state.intents = set(intents)
            annotations[len(turns)] = TurnAnnotation(intents=intents, delta=state)
            turns.append(Utterance("patient", text))
        if rng.random() < 0.5:
            turns.append(Utterance("doctor", rng.choice(tpl.doctor)))
        dialogues.append(Dialogue(f"{spec.id_prefix}-{spec.seed}-{n:04d}", turns, annotations))
    return dialogues
