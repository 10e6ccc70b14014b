# -*- coding: utf-8 -*-
"""
提示（hint）衰减调度
按训练步计算提示比例，并用教师推理轨迹的前缀拼接提示条件化的 prompt
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .errors import DomainError

SCHEDULE_KINDS = ('cosine', 'linear', 'exponential', 'constant')

# 指数衰减默认速率，与衰减对比曲线的形状一致
DEFAULT_RATE_LAMBDA = 6.0


@dataclass(frozen=True)
class DecaySchedule:
    """
    衰减调度

    kind: cosine / linear / exponential / constant
    horizon_T: 提示关闭的步数上限，t > horizon_T 时比例为 0（constant 除外）
    rate_lambda: 仅指数衰减使用
    """
    kind: str = 'cosine'
    horizon_T: int = 600
    rate_lambda: float = DEFAULT_RATE_LAMBDA

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise DomainError(f"未知的衰减类型: {self.kind}")
        if int(self.horizon_T) != self.horizon_T or self.horizon_T < 1:
            raise DomainError(f"horizon_T 必须是正整数: {self.horizon_T}")
        if self.kind == 'exponential' and not self.rate_lambda > 0:
            raise DomainError(f"指数衰减要求 rate_lambda > 0: {self.rate_lambda}")

    def __call__(self, t: int) -> float:
        return hint_ratio(self, t)


@dataclass(frozen=True)
class TeacherTrace:
    """教师模型在题目语言下生成的推理轨迹"""
    tokens: Tuple[int, ...]
    language: str

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise DomainError("教师轨迹长度必须 >= 1")

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Question:
    tokens: Tuple[int, ...]
    language: str


@dataclass(frozen=True)
class HintedPrompt:
    """题目 + 教师轨迹前 k 个 token"""
    question_tokens: Tuple[int, ...]
    language: str
    hint_tokens: Tuple[int, ...]
    source_trace_len: int

    @property
    def k(self) -> int:
        return len(self.hint_tokens)

    @property
    def hint_fraction(self) -> float:
        return self.k / self.source_trace_len

    @property
    def tokens(self) -> Tuple[int, ...]:
        return self.question_tokens + self.hint_tokens


def hint_ratio(schedule: DecaySchedule, t: int) -> float:
    """
    第 t 步的提示比例 p_t，取值 [0, 1]

    cosine:      0.5 * (1 + cos(pi * t / T))
    linear:      1 - t / T
    exponential: exp(-lambda * t / T)
    constant:    恒为 1（不衰减，对照组使用）
    t > T 时三种衰减均截断为 0
    """
    if t < 0:
        raise DomainError(f"步数必须 >= 0: {t}")
    if schedule.kind == 'constant':
        return 1.0
    T = schedule.horizon_T
    if t > T:
        return 0.0
    x = t / T
    if schedule.kind == 'cosine':
        value = 0.5 * (1.0 + math.cos(math.pi * x))
    elif schedule.kind == 'linear':
        value = 1.0 - x
    else:
        value = math.exp(-schedule.rate_lambda * x)
    return min(1.0, max(0.0, value))


def hint_prefix_len(ratio: float, trace_len: int) -> int:
    """k = floor(ratio * L)"""
    if not 0.0 <= ratio <= 1.0:
        raise DomainError(f"提示比例超出 [0,1]: {ratio}")
    if trace_len < 1:
        raise DomainError(f"轨迹长度必须 >= 1: {trace_len}")
    return min(trace_len, math.floor(ratio * trace_len))


def build_hinted_prompt(question: Question, trace: TeacherTrace, k: int) -> HintedPrompt:
    """拼接 q ⊕ (h_1..h_k)，k = 0 时为原题"""
    if question.language != trace.language:
        raise DomainError(f"题目语言 {question.language} 与教师轨迹语言 {trace.language} 不一致")
    if k < 0 or k > trace.length:
        raise DomainError(f"提示长度 k={k} 超出 [0, {trace.length}]")
    return HintedPrompt(
        question_tokens=tuple(question.tokens),
        language=question.language,
        hint_tokens=tuple(trace.tokens[:k]),
        source_trace_len=trace.length,
    )


def schedule_preview(schedule: DecaySchedule, steps: int) -> List[Tuple[int, float]]:
    """返回 t = 0..steps 的 (t, p) 序列"""
    if steps < 0:
        raise DomainError(f"steps 必须 >= 0: {steps}")
    return [(t, hint_ratio(schedule, t)) for t in range(steps + 1)]


def format_preview_csv(rows: Sequence[Tuple[int, float]]) -> str:
    lines = ['t,p']
    lines.extend(f"{t},{p:.12g}" for t, p in rows)
    return '\n'.join(lines) + '\n'
