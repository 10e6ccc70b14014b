# -*- coding: utf-8 -*-
"""
奖励计算
把回答拆成推理轨迹与答案部分，分别校验格式、语言一致性、答案正确性，
三者取合取得到二值奖励 R = R_lc ∧ R_format ∧ R_acc
"""

import re
from dataclasses import dataclass, asdict
from fractions import Fraction
from typing import Optional

from .errors import ConfigError, DomainError
from .language_detect import UNKNOWN, LanguageDetector, default_detector
from .mathtext import extract_boxed, has_letters, strip_math

THINK_OPEN = '<think>'
THINK_CLOSE = '</think>'

# 数值比较的绝对容差
NUMERIC_TOLERANCE = 1e-9

__all__ = [
    'ResponseParts', 'RewardBreakdown', 'split_response', 'check_format', 'extract_boxed',
    'detect_language', 'check_language_consistency', 'verify_answer', 'composite_reward',
    'strip_math', 'score_response',
]


@dataclass(frozen=True)
class ResponseParts:
    """
    raw: 原始回答
    trace: <think> 与 </think> 之间的推理轨迹 o_t
    tail: </think> 之后的答案部分 o_a
    boxed: 抽取到的 \\boxed{} 内容
    well_formed: 是否找到成对且有序的 think 标签
    """
    raw: str
    trace: str
    tail: str
    boxed: Optional[str]
    well_formed: bool


@dataclass(frozen=True)
class RewardBreakdown:
    r_lc: int
    r_format: int
    r_acc: int
    r: int

    def to_dict(self):
        return asdict(self)


def split_response(raw: str) -> ResponseParts:
    """取第一个 <think> 与其后第一个 </think>；任一缺失视为格式错误，tail 为全文"""
    raw = raw or ''
    start = raw.find(THINK_OPEN)
    end = raw.find(THINK_CLOSE, start + len(THINK_OPEN)) if start >= 0 else -1
    if start < 0 or end < 0:
        return ResponseParts(raw=raw, trace='', tail=raw, boxed=extract_boxed(raw), well_formed=False)
    trace = raw[start + len(THINK_OPEN):end]
    tail = raw[end + len(THINK_CLOSE):]
    return ResponseParts(raw=raw, trace=trace, tail=tail, boxed=extract_boxed(tail), well_formed=True)


def check_format(parts: ResponseParts) -> int:
    return int(parts.well_formed and parts.boxed is not None)


def detect_language(text: str, detector: LanguageDetector = default_detector) -> str:
    return detector.detect(text)


def _tail_is_math_only(tail: str) -> bool:
    return not has_letters(strip_math(tail))


def check_language_consistency(parts: ResponseParts, question_lang: str,
                               detector: LanguageDetector = default_detector) -> int:
    """
    推理轨迹与答案部分都须与题目语言一致
    答案部分只有数学内容（识别为 unknown）时视为一致
    """
    if question_lang not in detector.supported_languages:
        raise ConfigError(f"题目语言 {question_lang} 不在识别器支持的语言中", key='lang')
    if not parts.well_formed:
        return 0
    if detector.detect(parts.trace) != question_lang:
        return 0
    tail_lang = detector.detect(parts.tail)
    if tail_lang == question_lang:
        return 1
    return int(tail_lang == UNKNOWN and _tail_is_math_only(parts.tail))


_WRAPPER = re.compile(r'^\\(?:text|textbf|textit|mathrm|mathbf|mbox)\{(.*)\}$', re.DOTALL)
_FRAC = re.compile(r'^(-?)\\d?frac\{([^{}]+)\}\{([^{}]+)\}$')
_WHITESPACE = re.compile(r'\s+')


def normalize_answer(text: str) -> str:
    """去首尾空白、合并空白、剥掉外层 $..$ 和 \\text{} 一类格式包装"""
    s = _WHITESPACE.sub(' ', (text or '').strip())
    while True:
        before = s
        if len(s) >= 2 and s.startswith('$') and s.endswith('$'):
            s = s.strip('$').strip()
        if s.startswith('\\(') and s.endswith('\\)'):
            s = s[2:-2].strip()
        m = _WRAPPER.match(s)
        if m:
            s = m.group(1).strip()
        if s == before:
            return s


def parse_number(text: str) -> Optional[Fraction]:
    """整数、小数、a/b、\\frac{a}{b} 解析为有理数，失败返回 None"""
    s = text.replace(' ', '')
    m = _FRAC.match(s)
    if m:
        num, den = parse_number(m.group(2)), parse_number(m.group(3))
        if num is None or den is None or den == 0:
            return None
        value = num / den
        return -value if m.group(1) else value
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        return None


def verify_answer(extracted: Optional[str], gold: str) -> int:
    if not gold or not gold.strip():
        raise DomainError("标准答案不能为空")
    if extracted is None:
        return 0
    a, b = normalize_answer(extracted), normalize_answer(gold)
    x, y = parse_number(a), parse_number(b)
    if x is not None and y is not None:
        return int(abs(x - y) <= Fraction(NUMERIC_TOLERANCE))
    return int(a == b)


def composite_reward(r_lc: int, r_format: int, r_acc: int, require_lc: bool = True) -> int:
    """
    R = R_lc ∧ R_format ∧ R_acc
    require_lc=False 时退化为只看格式与正确性的普通 GRPO 奖励
    """
    for name, value in (('r_lc', r_lc), ('r_format', r_format), ('r_acc', r_acc)):
        if value not in (0, 1):
            raise DomainError(f"{name} 必须是 0 或 1: {value}")
    if not require_lc:
        return int(r_format and r_acc)
    return int(r_lc and r_format and r_acc)


def score_response(raw: str, question_lang: str, gold: str,
                   detector: LanguageDetector = default_detector,
                   require_lc: bool = True) -> RewardBreakdown:
    """对一条文本回答计算完整奖励分解"""
    parts = split_response(raw)
    r_format = check_format(parts)
    r_lc = check_language_consistency(parts, question_lang, detector)
    r_acc = verify_answer(parts.boxed, gold)
    return RewardBreakdown(r_lc=r_lc, r_format=r_format, r_acc=r_acc,
                           r=composite_reward(r_lc, r_format, r_acc, require_lc))
