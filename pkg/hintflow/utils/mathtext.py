# -*- coding: utf-8 -*-
"""
数学片段处理：\\boxed{} 抽取、数学表达式剥离
"""

import re
from typing import Optional, Tuple

BOXED_MARKER = '\\boxed'

_DISPLAY_MATH = re.compile(r'\$\$.*?\$\$|\\\[.*?\\\]', re.DOTALL)
_INLINE_MATH = re.compile(r'\$.*?\$|\\\(.*?\\\)', re.DOTALL)
_LATEX_COMMAND = re.compile(r'\\[A-Za-z]+')
# 数字、运算符、括号组成的连续符号串
_SYMBOL_RUN = re.compile(r'(?:\d+(?:[.,]\d+)*|[+\-*/=^_<>×÷·±≤≥≠≈∞%{}()\[\]|\\])+')


def _balanced_span(text: str, start: int) -> Optional[Tuple[int, int]]:
    """从 start 处的 '{' 开始按括号深度扫描，返回内容区间 [start+1, end)"""
    if start >= len(text) or text[start] != '{':
        return None
    depth = 0
    for i in range(start, len(text)):
        ch = text[i]
        if ch == '{':
            depth += 1
        elif ch == '}':
            depth -= 1
            if depth == 0:
                return start + 1, i
    return None


def _brace_start(text: str, marker_end: int) -> int:
    i = marker_end
    while i < len(text) and text[i] == ' ':
        i += 1
    return i


def extract_boxed(text: str) -> Optional[str]:
    """取最后一个 \\boxed{...} 的内容；不存在或括号不平衡返回 None"""
    if not text:
        return None
    pos = text.rfind(BOXED_MARKER)
    if pos < 0:
        return None
    span = _balanced_span(text, _brace_start(text, pos + len(BOXED_MARKER)))
    if span is None:
        return None
    return text[span[0]:span[1]]


def _remove_boxed(text: str) -> str:
    out = []
    i = 0
    while True:
        pos = text.find(BOXED_MARKER, i)
        if pos < 0:
            out.append(text[i:])
            break
        out.append(text[i:pos])
        span = _balanced_span(text, _brace_start(text, pos + len(BOXED_MARKER)))
        if span is None:
            # 不平衡：只去掉标记本身
            i = pos + len(BOXED_MARKER)
        else:
            i = span[1] + 1
    return ''.join(out)


def strip_math(text: str) -> str:
    """
    去除数学表达式与符号，保留自然语言字符
    顺序：$$..$$ / \\[..\\] -> $..$ / \\(..\\) -> \\boxed{} -> \\命令 -> 符号串
    """
    if not text:
        return ''
    text = _DISPLAY_MATH.sub('', text)
    text = _INLINE_MATH.sub('', text)
    text = _remove_boxed(text)
    text = _LATEX_COMMAND.sub('', text)
    text = _SYMBOL_RUN.sub('', text)
    return text


def has_letters(text: str) -> bool:
    return any(ch.isalpha() for ch in text)
