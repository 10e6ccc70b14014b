# -*- coding: utf-8 -*-
"""
合成多语言推理环境
生成带教师轨迹的题目，按因子化过程采样输出，用词表子空间做精确语言识别，
并提供穷举期望奖励的 oracle
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax

from .errors import DomainError
from .grpo import Outcome, PolicyParams, PromptFeatures, answer_logits, language_logits, sample_outcome
from .language_detect import UNKNOWN
from .rewards import RewardBreakdown, composite_reward
from .schedules import Question, TeacherTrace

logger = logging.getLogger(__name__)

# 随机流编号，rng 由 (seed, 流, ...) 共同决定
STREAM_TRAIN_TASKS = 1
STREAM_EVAL_TASKS = 2
STREAM_ROLLOUT = 3
STREAM_EVAL_ROLLOUT = 4
STREAM_BATCH = 5
STREAM_ENTROPY = 6

QUESTION_LEN = 8

THINK_OPEN = '<think>'
THINK_CLOSE = '</think>'
MALFORMED_MARK = '<bad>'


@dataclass(frozen=True)
class LanguageSpec:
    """vocab_size: 词表子空间大小 V_l；competence: 初始化时加到正确答案 logit 上的 c_l"""
    id: str
    vocab_size: int = 16
    competence: float = 0.0


@dataclass(frozen=True)
class TierSpec:
    name: str
    offset: float = 0.0


DEFAULT_LANGUAGES = (
    LanguageSpec('en', 16, 2.0),
    LanguageSpec('de', 16, 1.5),
    LanguageSpec('ja', 16, -1.25),
    LanguageSpec('zh', 16, -1.25),
    LanguageSpec('th', 16, -2.0),
    LanguageSpec('sw', 16, -2.0),
)

DEFAULT_TIERS = (
    TierSpec('low', 0.0),
    TierSpec('medium', 0.5),
    TierSpec('high', 1.0),
    TierSpec('top', 1.5),
)


@dataclass(frozen=True)
class ArenaSpec:
    """
    合成环境参数

    pivot: 枢纽语言，推理语言漂移的目标
    drift_bias: δ0，推理语言偏向枢纽语言的初始加成
    m: 输出内容长度；teacher_len: 教师轨迹长度 L
    lang_gain / answer_gain: β_lang / β_ans，按 k/L 缩放的提示加成
    format_init: 初始 format_logit
    answer_key_seed: 题目族 -> 正确答案映射的随机种子
    """
    languages: Tuple[LanguageSpec, ...] = DEFAULT_LANGUAGES
    pivot: str = 'en'
    drift_bias: float = 1.5
    tiers: Tuple[TierSpec, ...] = DEFAULT_TIERS
    K: int = 8
    families: int = 4
    m: int = 12
    teacher_len: int = 24
    lang_gain: float = 2.0
    answer_gain: float = 2.0
    format_init: float = 2.0
    answer_key_seed: int = 0

    def __post_init__(self):
        ids = [lang.id for lang in self.languages]
        if not ids:
            raise DomainError("至少需要一种语言")
        if len(set(ids)) != len(ids):
            raise DomainError(f"语言 id 重复: {ids}")
        if self.pivot not in ids:
            raise DomainError(f"枢纽语言 {self.pivot} 不在语言列表中")
        if any(lang.vocab_size < 1 for lang in self.languages):
            raise DomainError("词表子空间大小必须 >= 1")
        if not self.tiers:
            raise DomainError("至少需要一个难度档位")
        if self.K < 2:
            raise DomainError(f"K 必须 >= 2: {self.K}")
        if self.m < 1:
            raise DomainError(f"m 必须 >= 1: {self.m}")
        if self.families < 1:
            raise DomainError(f"families 必须 >= 1: {self.families}")
        if self.teacher_len < 1:
            raise DomainError(f"teacher_len 必须 >= 1: {self.teacher_len}")

    @property
    def language_ids(self) -> List[str]:
        return [lang.id for lang in self.languages]

    @property
    def tier_names(self) -> List[str]:
        return [tier.name for tier in self.tiers]


@dataclass(frozen=True)
class Task:
    id: int
    language: str
    tier: str
    family: int
    correct_answer: int
    teacher: TeacherTrace
    question: Optional[Question] = None


def rng_for(seed: int, stream: int, *keys: int) -> np.random.Generator:
    """每个 (seed, 流, 键...) 对应一条独立随机流，与调度顺序无关"""
    return np.random.default_rng([int(seed), int(stream)] + [int(k) for k in keys])


class Arena:
    """合成环境，持有 ArenaSpec 与派生的下标、词表偏移和答案表"""

    def __init__(self, spec: Optional[ArenaSpec] = None):
        self.spec = spec or ArenaSpec()
        self.language_ids = self.spec.language_ids
        self.lang_index = {lang: i for i, lang in enumerate(self.language_ids)}
        self.pivot = self.lang_index[self.spec.pivot]
        self.vocab_sizes = tuple(lang.vocab_size for lang in self.spec.languages)
        self.vocab_offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.vocab_sizes)[:-1]]))
        self.tier_offsets = {tier.name: tier.offset for tier in self.spec.tiers}
        key_rng = np.random.default_rng([int(self.spec.answer_key_seed)])
        self.answer_key = tuple(int(a) for a in key_rng.integers(self.spec.K, size=self.spec.families))

    # ---- 题目 ----

    def _draw_tokens(self, rng: np.random.Generator, lang: str, n: int) -> Tuple[int, ...]:
        i = self.lang_index[lang]
        local = rng.integers(self.vocab_sizes[i], size=n)
        return tuple(int(self.vocab_offsets[i] + t) for t in local)

    def make_tasks(self, count: int, seed: int, stream: int = STREAM_TRAIN_TASKS,
                   stratified: bool = False, id_offset: int = 0) -> List[Task]:
        """
        由种子确定地生成 count 道题
        stratified=True 时按 语言 × 档位 循环分配，评测集用它保证每个格子题数相同
        """
        if count < 1:
            raise DomainError(f"题目数量必须 >= 1: {count}")
        rng = rng_for(seed, stream)
        langs = self.language_ids
        tiers = self.spec.tier_names
        tasks = []
        for n in range(count):
            if stratified:
                cell = n % (len(langs) * len(tiers))
                lang, tier = langs[cell // len(tiers)], tiers[cell % len(tiers)]
            else:
                lang = langs[int(rng.integers(len(langs)))]
                tier = tiers[int(rng.integers(len(tiers)))]
            family = int(rng.integers(self.spec.families))
            tasks.append(Task(
                id=id_offset + n,
                language=lang,
                tier=tier,
                family=family,
                correct_answer=self.answer_key[family],
                teacher=TeacherTrace(self._draw_tokens(rng, lang, self.spec.teacher_len), lang),
                question=Question(self._draw_tokens(rng, lang, QUESTION_LEN), lang),
            ))
        logger.debug(f"生成 {count} 道题 seed={seed} stream={stream} stratified={stratified}")
        return tasks

    # ---- 策略 ----

    def init_policy(self) -> PolicyParams:
        """答案表中正确项初始化为 c_l，其余参数为 0"""
        n = len(self.language_ids)
        answer = np.zeros((n, self.spec.families, self.spec.K))
        for i, lang in enumerate(self.spec.languages):
            for fam, correct in enumerate(self.answer_key):
                answer[i, fam, correct] = lang.competence
        return PolicyParams(
            format_logit=self.spec.format_init,
            lang_logits=np.zeros((n, n)),
            token_logits=np.zeros((n, max(self.vocab_sizes))),
            answer_logits=answer,
            vocab_sizes=self.vocab_sizes,
        )

    def features(self, task: Task, k: int) -> PromptFeatures:
        L = task.teacher.length
        if not 0 <= k <= L:
            raise DomainError(f"提示长度 k={k} 超出 [0, {L}]")
        return PromptFeatures(
            input_language=self.lang_index[task.language],
            family=task.family,
            correct_answer=task.correct_answer,
            hint_fraction=k / L,
            tier_offset=self.tier_offsets[task.tier],
            pivot=self.pivot,
            drift_bias=self.spec.drift_bias,
            lang_gain=self.spec.lang_gain,
            answer_gain=self.spec.answer_gain,
        )

    def rollout(self, policy: PolicyParams, task: Task, k: int, rng: np.random.Generator) -> Outcome:
        return sample_outcome(policy, self.features(task, k), self.spec.m, rng)

    # ---- 评分 ----

    def token_language(self, token: int) -> Optional[str]:
        for i, offset in enumerate(self.vocab_offsets):
            if offset <= token < offset + self.vocab_sizes[i]:
                return self.language_ids[i]
        return None

    def detect_language(self, tokens: Sequence[int]) -> str:
        """词表子空间互不相交，所有 token 同属一种语言时识别精确"""
        langs = {self.token_language(t) for t in tokens}
        if len(langs) != 1 or None in langs:
            return UNKNOWN
        return langs.pop()

    def score_outcome(self, outcome: Outcome, task: Task, require_lc: bool = True) -> RewardBreakdown:
        r_format = int(outcome.well_formed)
        r_lc = int(self.detect_language(outcome.content_tokens) == task.language)
        r_acc = int(outcome.answer == task.correct_answer)
        return RewardBreakdown(r_lc, r_format, r_acc, composite_reward(r_lc, r_format, r_acc, require_lc))

    def expected_reward(self, policy: PolicyParams, task: Task, k: int, require_lc: bool = True) -> float:
        """
        穷举 格式 × 推理语言 × 答案 得到 E[R]，内容 token 不影响奖励故被边缘化
        require_lc=False 时对所有推理语言求和
        """
        f = self.features(task, k)
        p_wf = float(expit(policy.format_logit))
        lang_p = softmax(language_logits(policy, f))
        langs = [f.input_language] if require_lc else range(len(lang_p))
        total = 0.0
        for lang in langs:
            p_correct = softmax(answer_logits(policy, f, lang))[f.correct_answer]
            total += lang_p[lang] * p_correct
        return float(p_wf * total)

    def serialize_outcome(self, outcome: Outcome) -> List[str]:
        """<think> + m 个内容 token + </think> + 答案，共 m + 3 个 token"""
        open_mark, close_mark = (THINK_OPEN, THINK_CLOSE) if outcome.well_formed else (MALFORMED_MARK, MALFORMED_MARK)
        content = [f"t{t}" for t in outcome.content_tokens]
        return [open_mark] + content + [close_mark, f"a{outcome.answer}"]
