# -*- coding: utf-8 -*-
"""
评测指标
LCR / Acc / LC&Acc / DW-ACC / 重复分 / 平均回答长度，
既可用于合成环境的 rollout，也可用于外部 JSONL 回答语料
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from jsonschema import Draft7Validator
from joblib import Parallel, delayed

from .errors import CorpusError, DomainError
from .language_detect import LanguageDetector, default_detector
from .mathtext import strip_math
from .rewards import check_format, check_language_consistency, composite_reward, split_response, verify_answer

logger = logging.getLogger(__name__)

TIER_NAMES = ('low', 'medium', 'high', 'top')

# 难度权重逐档翻倍，归一化常数 1+2+4+8 = 15
DW_WEIGHTS = (1, 2, 4, 8)

REPORT_DECIMALS = 6

RECORD_SCHEMA = {
    'type': 'object',
    'required': ['question', 'lang', 'response', 'gold'],
    'properties': {
        'question': {'type': 'string'},
        'lang': {'type': 'string', 'minLength': 1},
        'response': {'type': 'string'},
        'gold': {'type': 'string', 'pattern': r'\S'},
        'tier': {'enum': list(TIER_NAMES)},
    },
}

_record_validator = Draft7Validator(RECORD_SCHEMA)


@dataclass(frozen=True)
class EvalRecord:
    question: str
    question_language: str
    response: str
    gold: str
    tier: Optional[str] = None

    def __post_init__(self):
        if not self.gold or not self.gold.strip():
            raise DomainError("标准答案不能为空")
        if self.tier is not None and self.tier not in TIER_NAMES:
            raise DomainError(f"未知的难度档位: {self.tier}")


@dataclass(frozen=True)
class RecordVerdict:
    r_lc: int
    r_format: int
    r_acc: int
    r: int
    extracted: Optional[str]


@dataclass
class MetricsRecord:
    lcr: float
    acc: float
    lc_acc: float
    repeat: float
    mean_len: float
    count: int
    dw_acc: Optional[float] = None
    lc_acc_by_language: Dict[str, float] = field(default_factory=dict)
    lc_acc_by_group: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        """实数保留 6 位小数；缺档位时不输出 dw_acc，分语言/分组统计为空时不输出"""
        def r(x):
            return round(float(x), REPORT_DECIMALS)

        data = {
            'lcr': r(self.lcr),
            'acc': r(self.acc),
            'lc_acc': r(self.lc_acc),
        }
        if self.dw_acc is not None:
            data['dw_acc'] = r(self.dw_acc)
        data.update(repeat=r(self.repeat), mean_len=r(self.mean_len), count=int(self.count))
        if self.lc_acc_by_language:
            data['lc_acc_by_language'] = {k: r(v) for k, v in self.lc_acc_by_language.items()}
        if self.lc_acc_by_group:
            data['lc_acc_by_group'] = {k: r(v) for k, v in self.lc_acc_by_group.items()}
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(', ', ': '))


def _require_nonempty(items, what='records'):
    if len(items) == 0:
        raise DomainError(f"{what} 为空")


# ---- 单条记录评分 -------------------------------------------------------------

def score_record(record: EvalRecord, detector: LanguageDetector = default_detector) -> RecordVerdict:
    parts = split_response(record.response)
    r_format = check_format(parts)
    r_lc = check_language_consistency(parts, record.question_language, detector)
    r_acc = verify_answer(parts.boxed, record.gold)
    return RecordVerdict(r_lc, r_format, r_acc, composite_reward(r_lc, r_format, r_acc), parts.boxed)


def score_records(records: Sequence[EvalRecord], detector: LanguageDetector = default_detector,
                  n_jobs: int = 1) -> List[RecordVerdict]:
    """逐条评分；n_jobs > 1 时用线程并行，结果顺序与输入一致"""
    if n_jobs and n_jobs > 1:
        return Parallel(n_jobs=n_jobs, prefer='threads')(delayed(score_record)(rec, detector) for rec in records)
    return [score_record(rec, detector) for rec in records]


# ---- 比率指标 -----------------------------------------------------------------

def lcr(records: Sequence[EvalRecord], detector: LanguageDetector = default_detector) -> float:
    """推理轨迹与答案都与题目语言一致的比例"""
    _require_nonempty(records)
    return float(np.mean([score_record(rec, detector).r_lc for rec in records]))


def accuracy(records: Sequence[EvalRecord]) -> float:
    """答案正确的比例，不论回答语言"""
    _require_nonempty(records)
    return float(np.mean([verify_answer(split_response(rec.response).boxed, rec.gold) for rec in records]))


def lc_and_acc(records: Sequence[EvalRecord], detector: LanguageDetector = default_detector) -> float:
    _require_nonempty(records)
    verdicts = [score_record(rec, detector) for rec in records]
    return float(np.mean([v.r_lc and v.r_acc for v in verdicts]))


def dw_acc(tier_accuracies: Sequence[float]) -> float:
    """(1·a1 + 2·a2 + 4·a3 + 8·a4) / 15，档位按 low / medium / high / top 顺序"""
    a = np.asarray(tier_accuracies, dtype=np.float64)
    if a.shape != (len(DW_WEIGHTS),):
        raise DomainError(f"需要 {len(DW_WEIGHTS)} 个档位准确率: {a.shape}")
    if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
        raise DomainError(f"档位准确率超出 [0,1]: {tier_accuracies}")
    weights = np.asarray(DW_WEIGHTS, dtype=np.float64)
    return float(np.dot(weights, a) / weights.sum())


def tier_accuracies(tiers: Sequence[Optional[str]], correct: Sequence[int]) -> Optional[List[float]]:
    """按档位统计准确率；四个档位未全部出现时返回 None"""
    hits = {name: [] for name in TIER_NAMES}
    for tier, ok in zip(tiers, correct):
        if tier in hits:
            hits[tier].append(ok)
    if any(not values for values in hits.values()):
        return None
    return [float(np.mean(hits[name])) for name in TIER_NAMES]


# ---- 重复分与长度 -------------------------------------------------------------

def repeat_score_tokens(tokens: Sequence[Hashable], n: int = 1, w: float = 1.0) -> float:
    """
    加权 n-gram 重复率 Σ f_i^w·[f_i>1] / Σ max(f_i,1)^w
    token 数少于 n 时为 0
    """
    if n < 1:
        raise DomainError(f"n 必须 >= 1: {n}")
    if not w > 0:
        raise DomainError(f"w 必须 > 0: {w}")
    tokens = list(tokens)
    if len(tokens) < n:
        return 0.0
    counter = Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    freqs = np.fromiter(counter.values(), dtype=np.float64)
    weighted = freqs ** w
    return float(weighted[freqs > 1].sum() / (np.maximum(freqs, 1.0) ** w).sum())


def repeat_score(text: str, n: int = 1, w: float = 1.0) -> float:
    """先剥离数学表达式，再按空白切分计算重复分"""
    return repeat_score_tokens(strip_math(text or '').split(), n, w)


def response_length(item) -> int:
    """文本按空白切分计数，token 序列直接取长度"""
    if isinstance(item, EvalRecord):
        item = item.response
    if isinstance(item, str):
        return len(item.split())
    return len(item)


def mean_response_length(items: Sequence) -> float:
    _require_nonempty(items)
    return float(np.mean([response_length(item) for item in items]))


# ---- 汇总 ---------------------------------------------------------------------

def corpus_metrics(records: Sequence[EvalRecord], detector: LanguageDetector = default_detector,
                   n: int = 1, w: float = 1.0, n_jobs: int = 1) -> Tuple[MetricsRecord, List[RecordVerdict]]:
    _require_nonempty(records)
    verdicts = score_records(records, detector, n_jobs)
    r_lc = np.array([v.r_lc for v in verdicts])
    r_acc = np.array([v.r_acc for v in verdicts])
    tiers = tier_accuracies([rec.tier for rec in records], r_acc)
    report = MetricsRecord(
        lcr=float(r_lc.mean()),
        acc=float(r_acc.mean()),
        lc_acc=float((r_lc & r_acc).mean()),
        dw_acc=dw_acc(tiers) if tiers is not None else None,
        repeat=float(np.mean([repeat_score(rec.response, n, w) for rec in records])),
        mean_len=mean_response_length(records),
        count=len(records),
    )
    return report, verdicts


def _grouped_mean(keys: Sequence[str], values: np.ndarray, order: Sequence[str]) -> Dict[str, float]:
    out = {}
    for key in order:
        mask = np.array([k == key for k in keys])
        if mask.any():
            out[key] = float(values[mask].mean())
    return out


def arena_metrics(arena, tasks: Sequence, outcomes: Sequence, group_of: Optional[Callable[[str], str]] = None,
                  group_ids: Sequence[str] = ()) -> MetricsRecord:
    """
    合成环境 rollout 的指标，每道题一条输出
    LC&Acc 只看语言一致与答案正确，与格式无关
    """
    _require_nonempty(outcomes, 'outcomes')
    if len(tasks) != len(outcomes):
        raise DomainError("tasks 与 outcomes 数量不一致")
    breakdowns = [arena.score_outcome(o, t) for o, t in zip(outcomes, tasks)]
    r_lc = np.array([b.r_lc for b in breakdowns])
    r_acc = np.array([b.r_acc for b in breakdowns])
    both = (r_lc & r_acc).astype(np.float64)
    serialized = [arena.serialize_outcome(o) for o in outcomes]
    tiers = tier_accuracies([t.tier for t in tasks], r_acc)
    langs = [t.language for t in tasks]
    by_group = {}
    if group_of is not None:
        by_group = _grouped_mean([group_of(lang) for lang in langs], both, group_ids)
    return MetricsRecord(
        lcr=float(r_lc.mean()),
        acc=float(r_acc.mean()),
        lc_acc=float(both.mean()),
        dw_acc=dw_acc(tiers) if tiers is not None else None,
        repeat=float(np.mean([repeat_score_tokens(tokens) for tokens in serialized])),
        mean_len=mean_response_length(serialized),
        count=len(outcomes),
        lc_acc_by_language=_grouped_mean(langs, both, arena.language_ids),
        lc_acc_by_group=by_group,
    )


# ---- 语料读取 -----------------------------------------------------------------

def parse_record(line: str, line_no: int) -> EvalRecord:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusError(line_no, f"JSON 解析失败: {e.msg}")
    return record_from_dict(data, line_no)


def record_from_dict(data, line_no: Optional[int] = None) -> EvalRecord:
    """按语料记录 schema 校验字典并构造 EvalRecord"""
    errors = sorted(_record_validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = '.'.join(str(p) for p in err.path) or '记录'
        raise CorpusError(line_no, f"{where}: {err.message}")
    return EvalRecord(
        question=data['question'],
        question_language=data['lang'],
        response=data['response'],
        gold=data['gold'],
        tier=data.get('tier'),
    )


def load_corpus(path: str, skip_bad: bool = False) -> Tuple[List[EvalRecord], int]:
    """
    读取 JSONL 语料，返回 (记录列表, 跳过的行数)
    严格模式遇到坏行即抛出 CorpusError；skip_bad 时计数并跳过，空行直接忽略
    """
    if not os.path.exists(path):
        raise CorpusError(None, f"语料文件不存在: {path}")
    records, skipped = [], 0
    with open(path, 'rb') as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                try:
                    line = raw.decode('utf-8')
                except UnicodeDecodeError as e:
                    raise CorpusError(line_no, f"不是合法的 UTF-8: 字节偏移 {e.start}")
                records.append(parse_record(line, line_no))
            except CorpusError as e:
                if not skip_bad:
                    raise
                skipped += 1
                logger.warning(f"跳过坏行: {e}")
    if not records:
        raise CorpusError(None, f"语料为空: {path}")
    return records, skipped
