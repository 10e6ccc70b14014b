# -*- coding: utf-8 -*-
"""
GRPO 策略优化
因子化类别策略（格式 / 推理语言 / 内容 token / 答案）上的
组内标准化优势、截断代理目标（beta = 0）、解析梯度与策略熵估计
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from .errors import DomainError, NumericError

logger = logging.getLogger(__name__)

# 标准差低于该值的组视为奖励无差别，优势全为 0
STD_FLOOR = 1e-12

FACTORS = ('format', 'language', 'content', 'answer')

SECTIONS = ('format_logit', 'lang_logits', 'token_logits', 'answer_logits')


@dataclass(eq=False)
class PolicyParams:
    """
    因子化策略参数 θ

    format_logit: 输出格式正确的倾向，P(wf) = sigmoid(format_logit)
    lang_logits: [输入语言 × 推理语言]
    token_logits: [推理语言 × V_max]，第 l 行只使用前 vocab_sizes[l] 列
    answer_logits: [推理语言 × 题目族 × K]
    vocab_sizes: 各语言的词表子空间大小，全局 token id = 偏移 + 局部 id
    """
    format_logit: float
    lang_logits: np.ndarray
    token_logits: np.ndarray
    answer_logits: np.ndarray
    vocab_sizes: Tuple[int, ...] = ()

    def __post_init__(self):
        self.format_logit = float(self.format_logit)
        self.lang_logits = np.array(self.lang_logits, dtype=np.float64)
        self.token_logits = np.array(self.token_logits, dtype=np.float64)
        self.answer_logits = np.array(self.answer_logits, dtype=np.float64)
        n = self.lang_logits.shape[0]
        if self.lang_logits.shape != (n, n):
            raise DomainError(f"lang_logits 必须是方阵: {self.lang_logits.shape}")
        if self.token_logits.ndim != 2 or self.token_logits.shape[0] != n:
            raise DomainError(f"token_logits 形状不符: {self.token_logits.shape}")
        if self.answer_logits.ndim != 3 or self.answer_logits.shape[0] != n:
            raise DomainError(f"answer_logits 形状不符: {self.answer_logits.shape}")
        if not self.vocab_sizes:
            self.vocab_sizes = (self.token_logits.shape[1],) * n
        self.vocab_sizes = tuple(int(v) for v in self.vocab_sizes)
        if len(self.vocab_sizes) != n or min(self.vocab_sizes) < 1 \
                or max(self.vocab_sizes) > self.token_logits.shape[1]:
            raise DomainError(f"vocab_sizes 与 token_logits 不一致: {self.vocab_sizes}")

    @property
    def n_languages(self) -> int:
        return self.lang_logits.shape[0]

    @property
    def families(self) -> int:
        return self.answer_logits.shape[1]

    @property
    def K(self) -> int:
        return self.answer_logits.shape[2]

    @property
    def vocab_offsets(self) -> Tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.vocab_sizes)[:-1]]))

    def sections(self) -> Dict[str, np.ndarray]:
        return {
            'format_logit': np.array(self.format_logit, dtype=np.float64),
            'lang_logits': self.lang_logits,
            'token_logits': self.token_logits,
            'answer_logits': self.answer_logits,
        }

    @classmethod
    def from_sections(cls, sections: Dict[str, np.ndarray], vocab_sizes=()) -> 'PolicyParams':
        return cls(
            format_logit=float(np.asarray(sections['format_logit']).reshape(())),
            lang_logits=sections['lang_logits'],
            token_logits=sections['token_logits'],
            answer_logits=sections['answer_logits'],
            vocab_sizes=tuple(vocab_sizes),
        )

    def zeros_like(self) -> 'PolicyParams':
        return PolicyParams(0.0, np.zeros_like(self.lang_logits), np.zeros_like(self.token_logits),
                            np.zeros_like(self.answer_logits), self.vocab_sizes)

    def copy(self) -> 'PolicyParams':
        return PolicyParams(self.format_logit, self.lang_logits.copy(), self.token_logits.copy(),
                            self.answer_logits.copy(), self.vocab_sizes)

    def flat(self) -> np.ndarray:
        return np.concatenate([[self.format_logit], self.lang_logits.ravel(),
                               self.token_logits.ravel(), self.answer_logits.ravel()])

    def from_flat(self, vector: np.ndarray) -> 'PolicyParams':
        """按本对象的形状把一维向量还原为参数"""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.size,):
            raise DomainError(f"参数向量长度 {vector.shape} 与策略大小 {self.size} 不一致")
        pos = 1
        parts = []
        for arr in (self.lang_logits, self.token_logits, self.answer_logits):
            parts.append(vector[pos:pos + arr.size].reshape(arr.shape))
            pos += arr.size
        return PolicyParams(vector[0], parts[0], parts[1], parts[2], self.vocab_sizes)

    @property
    def size(self) -> int:
        return 1 + self.lang_logits.size + self.token_logits.size + self.answer_logits.size

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))


@dataclass(frozen=True)
class PromptFeatures:
    """
    提示相关特征，在新旧策略下完全相同

    hint_fraction: k / L
    tier_offset: 难度档位偏移 d_tier，从正确答案 logit 中减去
    drift_bias: 推理语言偏向枢纽语言的 logit 加成 δ0
    lang_gain / answer_gain: 提示加成系数 β_lang / β_ans
    """
    input_language: int
    family: int
    correct_answer: int
    hint_fraction: float = 0.0
    tier_offset: float = 0.0
    pivot: int = 0
    drift_bias: float = 0.0
    lang_gain: float = 0.0
    answer_gain: float = 0.0


@dataclass(frozen=True)
class Outcome:
    """一次 rollout 的因子化输出，content_tokens 为全局 token id"""
    well_formed: bool
    reasoning_language: int
    content_tokens: Tuple[int, ...]
    answer: int
    logprob_old: float = 0.0


@dataclass(frozen=True)
class TrainHyper:
    clip_eps: float = 0.2
    kl_beta: float = 0.0
    lr: float = 2.0
    group_size: int = 8
    alpha: float = 0.5
    tau: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise DomainError(f"clip_eps 必须在 (0,1) 内: {self.clip_eps}")
        if self.kl_beta != 0.0:
            raise DomainError(f"只支持 kl_beta = 0: {self.kl_beta}")
        if not self.lr > 0:
            raise DomainError(f"lr 必须 > 0: {self.lr}")
        if self.group_size < 2:
            raise DomainError(f"group_size 必须 >= 2: {self.group_size}")
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha 超出 [0,1): {self.alpha}")
        if self.tau < 0:
            raise DomainError(f"tau 必须 >= 0: {self.tau}")


@dataclass(frozen=True)
class Sample:
    """参与一次梯度计算的单条轨迹"""
    features: PromptFeatures
    outcome: Outcome
    advantage: float


@dataclass(eq=False)
class RolloutGroup:
    """同一提示下的 G 条 rollout 及其奖励与标准化优势"""
    prompt: object
    features: PromptFeatures
    outcomes: List[Outcome]
    rewards: List[float]
    advantages: List[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.outcomes) != len(self.rewards):
            raise DomainError("outcomes 与 rewards 数量不一致")
        if not self.advantages:
            self.advantages = list(standardize_advantages(self.rewards))

    @property
    def size(self) -> int:
        return len(self.outcomes)

    def samples(self) -> List[Sample]:
        return [Sample(self.features, o, float(a)) for o, a in zip(self.outcomes, self.advantages)]


def standardize_advantages(rewards: Sequence[float]) -> np.ndarray:
    """A_i = (r_i - mean) / std，总体标准差；组内奖励无差别时全为 0"""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise DomainError(f"组大小必须 >= 2: {r.size}")
    std = r.std()
    if std < STD_FLOOR:
        return np.zeros_like(r)
    return (r - r.mean()) / std


# ---- 因子化过程 -------------------------------------------------------------

def language_logits(policy: PolicyParams, features: PromptFeatures) -> np.ndarray:
    logits = policy.lang_logits[features.input_language].copy()
    logits[features.pivot] += features.drift_bias
    logits[features.input_language] += features.lang_gain * features.hint_fraction
    return logits


def token_logprobs(policy: PolicyParams, lang: int) -> np.ndarray:
    return log_softmax(policy.token_logits[lang, :policy.vocab_sizes[lang]])


def answer_logits(policy: PolicyParams, features: PromptFeatures, lang: int) -> np.ndarray:
    logits = policy.answer_logits[lang, features.family].copy()
    logits[features.correct_answer] += features.answer_gain * features.hint_fraction - features.tier_offset
    return logits


def _local_tokens(policy: PolicyParams, outcome: Outcome) -> np.ndarray:
    lang = outcome.reasoning_language
    local = np.asarray(outcome.content_tokens, dtype=np.int64) - policy.vocab_offsets[lang]
    if local.size and (local.min() < 0 or local.max() >= policy.vocab_sizes[lang]):
        raise DomainError(f"内容 token 不在推理语言 {lang} 的词表子空间内")
    return local


def _check_outcome(policy: PolicyParams, features: PromptFeatures, outcome: Outcome) -> None:
    if not 0 <= outcome.reasoning_language < policy.n_languages:
        raise DomainError(f"推理语言下标越界: {outcome.reasoning_language}")
    if not 0 <= outcome.answer < policy.K:
        raise DomainError(f"答案下标越界: {outcome.answer}")
    if not 0 <= features.family < policy.families:
        raise DomainError(f"题目族下标越界: {features.family}")


def factor_logprobs(policy: PolicyParams, features: PromptFeatures, outcome: Outcome) -> Dict[str, float]:
    """各因子的对数概率，提示加成已计入 logits"""
    _check_outcome(policy, features, outcome)
    lang = outcome.reasoning_language
    x = policy.format_logit
    lp_format = log_expit(x) if outcome.well_formed else log_expit(-x)
    lp_lang = log_softmax(language_logits(policy, features))[lang]
    lp_content = token_logprobs(policy, lang)[_local_tokens(policy, outcome)].sum()
    lp_answer = log_softmax(answer_logits(policy, features, lang))[outcome.answer]
    return {
        'format': float(lp_format),
        'language': float(lp_lang),
        'content': float(lp_content),
        'answer': float(lp_answer),
    }


def sequence_logprob(policy: PolicyParams, features: PromptFeatures, outcome: Outcome) -> float:
    return float(sum(factor_logprobs(policy, features, outcome).values()))


def sample_outcome(policy: PolicyParams, features: PromptFeatures, m: int,
                   rng: np.random.Generator) -> Outcome:
    """按顺序采样：格式 -> 推理语言 -> m 个内容 token -> 答案"""
    if m < 0:
        raise DomainError(f"内容长度必须 >= 0: {m}")
    well_formed = bool(rng.random() < expit(policy.format_logit))
    lang_p = softmax(language_logits(policy, features))
    lang = int(rng.choice(policy.n_languages, p=lang_p))
    token_p = np.exp(token_logprobs(policy, lang))
    local = rng.choice(policy.vocab_sizes[lang], size=m, p=token_p)
    answer_p = softmax(answer_logits(policy, features, lang))
    answer = int(rng.choice(policy.K, p=answer_p))
    offset = policy.vocab_offsets[lang]
    outcome = Outcome(well_formed, lang, tuple(int(offset + t) for t in local), answer)
    return replace(outcome, logprob_old=sequence_logprob(policy, features, outcome))


# ---- 目标函数与梯度 ---------------------------------------------------------

def clipped_surrogate(old_lp: Sequence[float], new_lp: Sequence[float], adv: Sequence[float],
                      eps: float) -> float:
    """mean_i min(ρ_i A_i, clip(ρ_i, 1-ε, 1+ε) A_i)，ρ_i 为序列级重要性比"""
    old_lp, new_lp, adv = (np.asarray(x, dtype=np.float64) for x in (old_lp, new_lp, adv))
    if not old_lp.shape == new_lp.shape == adv.shape:
        raise DomainError(f"长度不一致: {old_lp.shape} {new_lp.shape} {adv.shape}")
    if old_lp.size == 0:
        raise DomainError("样本为空")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps 必须在 (0,1) 内: {eps}")
    ratio = np.exp(new_lp - old_lp)
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    return float(np.mean(np.minimum(ratio * adv, clipped * adv)))


def surrogate_objective(policy: PolicyParams, samples: Sequence[Sample], eps: float) -> float:
    old = [s.outcome.logprob_old for s in samples]
    new = [sequence_logprob(policy, s.features, s.outcome) for s in samples]
    return clipped_surrogate(old, new, [s.advantage for s in samples], eps)


def add_logprob_gradient(grad: PolicyParams, policy: PolicyParams, features: PromptFeatures,
                         outcome: Outcome, scale: float) -> None:
    """grad += scale * ∇θ log π(outcome)；类别因子的梯度为 one-hot - softmax"""
    lang = outcome.reasoning_language
    wf = 1.0 if outcome.well_formed else 0.0
    grad.format_logit += scale * (wf - expit(policy.format_logit))

    row = grad.lang_logits[features.input_language]
    row -= scale * softmax(language_logits(policy, features))
    row[lang] += scale

    V = policy.vocab_sizes[lang]
    local = _local_tokens(policy, outcome)
    counts = np.bincount(local, minlength=V).astype(np.float64)
    grad.token_logits[lang, :V] += scale * (counts - local.size * np.exp(token_logprobs(policy, lang)))

    cell = grad.answer_logits[lang, features.family]
    cell -= scale * softmax(answer_logits(policy, features, lang))
    cell[outcome.answer] += scale


def batch_surrogate_gradient(policy: PolicyParams, samples: Sequence[Sample], eps: float) -> PolicyParams:
    """
    截断代理目标对 θ 的梯度，按样本取平均
    未截断分支生效（ρA <= clip(ρ)A）的样本贡献 ρ·A·∇log π，截断分支生效的样本贡献 0
    """
    if not samples:
        raise DomainError("样本为空")
    grad = policy.zeros_like()
    scale_base = 1.0 / len(samples)
    for s in samples:
        if s.advantage == 0.0:
            continue
        _check_outcome(policy, s.features, s.outcome)
        rho = float(np.exp(sequence_logprob(policy, s.features, s.outcome) - s.outcome.logprob_old))
        clipped = min(max(rho, 1.0 - eps), 1.0 + eps)
        if rho * s.advantage <= clipped * s.advantage:
            add_logprob_gradient(grad, policy, s.features, s.outcome, scale_base * rho * s.advantage)
    return grad


def surrogate_gradient(policy: PolicyParams, group: RolloutGroup, eps: float) -> PolicyParams:
    return batch_surrogate_gradient(policy, group.samples(), eps)


def sgd_step(policy: PolicyParams, gradient: PolicyParams, lr: float) -> PolicyParams:
    """θ' = θ + lr · g（梯度上升）；梯度含非有限值时中止"""
    g = gradient.flat()
    if g.shape != policy.flat().shape:
        raise DomainError("梯度与策略形状不一致")
    if not np.all(np.isfinite(g)):
        logger.error(f"梯度含非有限值: {int(np.sum(~np.isfinite(g)))} 个分量")
        raise NumericError("梯度含非有限值，本步更新已中止")
    updated = policy.from_flat(policy.flat() + lr * g)
    if not updated.is_finite():
        raise NumericError("更新后参数出现非有限值")
    return updated


# ---- 熵估计 -----------------------------------------------------------------

def token_nll(outcome: Outcome) -> float:
    """按 m + 3 个决策平均的负对数概率（旧策略下）"""
    return -outcome.logprob_old / (len(outcome.content_tokens) + 3)


def _decision_count(outcome: Outcome, factors: Iterable[str]) -> int:
    n = 0
    for name in factors:
        n += len(outcome.content_tokens) if name == 'content' else 1
    return n


def entropy_samples(policy: PolicyParams, prompts: Sequence[PromptFeatures], samples_per_prompt: int,
                    m: int, rng: np.random.Generator,
                    factors: Optional[Sequence[str]] = None) -> np.ndarray:
    """
    每条采样输出的 token 平均负对数概率 -log π(y)/|y|
    factors 限定参与统计的因子，默认四个因子全部计入（共 m + 3 个决策）
    """
    if samples_per_prompt < 1:
        raise DomainError(f"samples_per_prompt 必须 >= 1: {samples_per_prompt}")
    factors = tuple(factors or FACTORS)
    unknown = set(factors) - set(FACTORS)
    if unknown:
        raise DomainError(f"未知的因子: {sorted(unknown)}")
    values = []
    for features in prompts:
        for _ in range(samples_per_prompt):
            outcome = sample_outcome(policy, features, m, rng)
            n = _decision_count(outcome, factors)
            if n == 0:
                continue
            lp = factor_logprobs(policy, features, outcome)
            values.append(-sum(lp[name] for name in factors) / n)
    return np.asarray(values, dtype=np.float64)


def entropy_estimate(policy: PolicyParams, prompts: Sequence[PromptFeatures], samples_per_prompt: int,
                     m: int, rng: np.random.Generator, factors: Optional[Sequence[str]] = None) -> float:
    values = entropy_samples(policy, prompts, samples_per_prompt, m, rng, factors)
    return float(values.mean()) if values.size else 0.0
