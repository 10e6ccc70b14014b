# -*- coding: utf-8 -*-
"""
语言识别
内置基于 Unicode 文字区段 + 拉丁语系功能词表的启发式识别器；
可替换为 langdetect 等更强的识别器，只需满足 detect(text) -> 语言 id 或 'unknown'
"""

import re
from collections import Counter
from typing import Dict, FrozenSet, Protocol

from .mathtext import strip_math

UNKNOWN = 'unknown'

# 至少需要这么多可计数字符才做判断
MIN_COUNTABLE_CHARS = 5


def _char_class(*ranges):
    return re.compile('[' + ''.join(f'{chr(lo)}-{chr(hi)}' for lo, hi in ranges) + ']')


_SCRIPT_RANGES = [
    ('ko', _char_class((0xAC00, 0xD7AF), (0x1100, 0x11FF), (0x3130, 0x318F))),
    ('kana', _char_class((0x3040, 0x30FF), (0x31F0, 0x31FF))),
    ('han', _char_class((0x3400, 0x4DBF), (0x4E00, 0x9FFF))),
    ('th', _char_class((0x0E00, 0x0E7F))),
    ('ar', _char_class((0x0600, 0x06FF), (0x0750, 0x077F))),
    ('bn', _char_class((0x0980, 0x09FF))),
    ('te', _char_class((0x0C00, 0x0C7F))),
    ('ru', _char_class((0x0400, 0x04FF))),
    ('latin', _char_class((0x41, 0x5A), (0x61, 0x7A), (0x00C0, 0x024F), (0x1E00, 0x1EFF))),
]

# 越南语特有字母 ă đ ơ ư（大小写）及带声调组合区段，â ê ô 与法语、葡萄牙语共用故不计入
_VIETNAMESE_CHARS = re.compile(
    "[" + "".join(chr(c) for c in (0x103, 0x111, 0x1A1, 0x1B0, 0x102, 0x110, 0x1A0, 0x1AF))
    + f"{chr(0x1EA0)}-{chr(0x1EF9)}]"
)

_LATIN_FUNCTION_WORDS = {
    'en': {'the', 'is', 'and', 'of', 'to', 'we', 'so', 'that', 'this', 'are', 'answer', 'then', 'therefore'},
    'de': {'der', 'die', 'das', 'und', 'ist', 'nicht', 'mit', 'wir', 'ein', 'eine', 'also', 'ergibt', 'antwort'},
    'fr': {'le', 'la', 'les', 'et', 'est', 'des', 'une', 'nous', 'donc', 'pour', 'réponse', 'alors'},
    'es': {'el', 'los', 'las', 'es', 'y', 'una', 'por', 'para', 'entonces', 'respuesta', 'del'},
    'pt': {'o', 'os', 'as', 'é', 'uma', 'não', 'então', 'resposta', 'do', 'da', 'portanto'},
    'it': {'il', 'lo', 'gli', 'è', 'che', 'una', 'per', 'quindi', 'non', 'risposta', 'della'},
    'sw': {'na', 'ya', 'wa', 'ni', 'kwa', 'za', 'katika', 'hivyo', 'jibu', 'hii', 'hilo'},
    'id': {'yang', 'dan', 'adalah', 'ini', 'itu', 'dengan', 'untuk', 'jadi', 'kita', 'jawaban'},
}

SUPPORTED_LANGUAGES = frozenset(
    ['ko', 'ja', 'zh', 'th', 'ar', 'bn', 'te', 'ru', 'vi'] + list(_LATIN_FUNCTION_WORDS)
)

_WORD = re.compile(r'[^\W\d_]+', re.UNICODE)


class LanguageDetector(Protocol):
    supported_languages: FrozenSet[str]

    def detect(self, text: str) -> str:
        ...


def _latin_language(text: str) -> str:
    """拉丁字母文本按功能词命中数判定，无命中时按英语处理"""
    if _VIETNAMESE_CHARS.search(text):
        return 'vi'
    words = [w.lower() for w in _WORD.findall(text)]
    hits = Counter()
    for word in words:
        for lang, vocab in _LATIN_FUNCTION_WORDS.items():
            if word in vocab:
                hits[lang] += 1
    if not hits:
        return 'en'
    # 命中数相同按表中顺序
    order = list(_LATIN_FUNCTION_WORDS)
    return max(hits, key=lambda lang: (hits[lang], -order.index(lang)))


class ScriptHeuristicDetector:
    """文字区段直方图取多数；确定性，不依赖随机性"""

    supported_languages = SUPPORTED_LANGUAGES

    def __init__(self, min_chars: int = MIN_COUNTABLE_CHARS):
        self.min_chars = min_chars

    def script_counts(self, text: str) -> Dict[str, int]:
        counts = {}
        for name, pattern in _SCRIPT_RANGES:
            n = len(pattern.findall(text))
            if n:
                counts[name] = n
        return counts

    def detect(self, text: str) -> str:
        if not text:
            return UNKNOWN
        text = strip_math(text)
        counts = self.script_counts(text)
        if sum(counts.values()) < self.min_chars:
            return UNKNOWN

        buckets = Counter()
        for name, n in counts.items():
            if name == 'kana':
                buckets['ja'] += n
            elif name == 'han':
                # 出现假名时汉字归入日语
                buckets['ja' if 'kana' in counts else 'zh'] += n
            elif name == 'latin':
                buckets[_latin_language(text)] += n
            else:
                buckets[name] += n
        # 票数相同时按语言 id 字典序，保证确定性
        return max(sorted(buckets), key=buckets.get)


class LangdetectDetector:
    """
    langdetect 封装，固定随机种子保证同一输入结果一致
    先剥离数学片段；过短或识别失败返回 unknown
    """

    supported_languages = SUPPORTED_LANGUAGES

    _CODE_MAP = {'zh-cn': 'zh', 'zh-tw': 'zh'}

    def __init__(self, min_chars: int = MIN_COUNTABLE_CHARS, seed: int = 0):
        from langdetect import DetectorFactory
        DetectorFactory.seed = seed
        self.min_chars = min_chars

    def detect(self, text: str) -> str:
        from langdetect import detect
        from langdetect.lang_detect_exception import LangDetectException

        text = strip_math(text or '')
        if sum(ch.isalpha() for ch in text) < self.min_chars:
            return UNKNOWN
        try:
            code = detect(text)
        except LangDetectException:
            return UNKNOWN
        return self._CODE_MAP.get(code, code)


def get_detector(name: str = 'script') -> LanguageDetector:
    if name == 'script':
        return ScriptHeuristicDetector()
    if name == 'langdetect':
        return LangdetectDetector()
    raise ValueError(f"未知的语言识别器: {name}")


# 默认识别器实例
default_detector = ScriptHeuristicDetector()
