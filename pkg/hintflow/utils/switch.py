# -*- coding: utf-8 -*-
"""
语言自适应开关
按资源分组统计有效更新率 u，做 EMA 平滑，EMA 达到阈值 tau 后该组永久切换到零提示
"""

import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from .errors import ConfigError, ConfigValidationError, DomainError
from .schedules import DecaySchedule, hint_ratio

logger = logging.getLogger(__name__)

GROUP_IDS = ('high', 'mid', 'low')

# 按语言资源可用性划分的默认三组
DEFAULT_GROUP_MEMBERS = {
    'high': ('en', 'de', 'fr', 'es', 'pt', 'it'),
    'mid': ('ja', 'zh', 'ru', 'ko', 'vi'),
    'low': ('ar', 'bn', 'th', 'sw', 'te', 'id'),
}


@dataclass(frozen=True)
class LanguageGroup:
    id: str
    members: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class SwitchState:
    """
    ema: 平滑后的有效更新率 ū
    last_raw: 最近一次的 u
    switch_step: 切换步 T_R，未切换时为 None
    """
    ema: float = 0.0
    last_raw: float = 0.0
    switch_step: Optional[int] = None

    @property
    def switched(self) -> bool:
        return self.switch_step is not None


def default_groups() -> List[LanguageGroup]:
    return [LanguageGroup(gid, frozenset(DEFAULT_GROUP_MEMBERS[gid])) for gid in GROUP_IDS]


def validate_groups(groups: Sequence[LanguageGroup], languages: Iterable[str]) -> None:
    """分组必须互不相交且覆盖全部语言"""
    seen = {}
    for group in groups:
        for lang in group.members:
            if lang in seen:
                raise ConfigValidationError(f"语言 {lang} 同时属于 {seen[lang]} 和 {group.id}", key='groups')
            seen[lang] = group.id
    languages = list(languages)
    missing = [lang for lang in languages if lang not in seen]
    if missing:
        raise ConfigValidationError(f"以下语言未分组: {', '.join(missing)}", key='groups')
    extra = sorted(set(seen) - set(languages))
    if extra:
        raise ConfigValidationError(f"分组中含未配置的语言: {', '.join(extra)}", key='groups')


def classify_language(lang: str, groups: Sequence[LanguageGroup]) -> str:
    for group in groups:
        if lang in group.members:
            return group.id
    raise ConfigError(f"语言 {lang} 不属于任何资源分组", key='groups')


def effective_update_rate(instance_advantages: Sequence[Sequence[float]]) -> float:
    """组内 batch 中至少含一个正优势轨迹的实例占比"""
    if len(instance_advantages) == 0:
        raise DomainError("组 batch 为空，调用方应跳过本步未出现的分组")
    hits = 0
    for advantages in instance_advantages:
        if len(advantages) < 1:
            raise DomainError("每个实例至少需要一个 rollout 的优势值")
        if any(a > 0 for a in advantages):
            hits += 1
    return hits / len(instance_advantages)


def ema_update(state: SwitchState, u: float, alpha: float) -> SwitchState:
    """ū(t) = alpha * ū(t-1) + (1 - alpha) * u(t)"""
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u 超出 [0,1]: {u}")
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha 超出 [0,1): {alpha}")
    ema = alpha * state.ema + (1.0 - alpha) * u
    return replace(state, ema=min(1.0, max(0.0, ema)), last_raw=u)


def check_switch(state: SwitchState, t: int, tau: float) -> SwitchState:
    if state.switched or state.ema < tau:
        return state
    return replace(state, switch_step=t)


def effective_ratio(schedule: DecaySchedule, t: int, state: SwitchState) -> float:
    if state.switched:
        return 0.0
    return hint_ratio(schedule, t)


class LanguageAdaptiveSwitch:
    """
    训练循环持有的分组开关状态

    状态只由训练循环修改；snapshot() 加锁返回一致快照，供报告代码读取
    """

    def __init__(self, groups: Sequence[LanguageGroup], alpha: float = 0.5, tau: float = 0.4):
        if not 0.0 <= alpha < 1.0:
            raise DomainError(f"alpha 超出 [0,1): {alpha}")
        if tau < 0:
            raise DomainError(f"tau 必须 >= 0: {tau}")
        self.groups = list(groups)
        self.alpha = alpha
        self.tau = tau
        self.states: Dict[str, SwitchState] = {group.id: SwitchState() for group in self.groups}
        self.lock = threading.Lock()

    @property
    def group_ids(self) -> List[str]:
        return [group.id for group in self.groups]

    def group_of(self, lang: str) -> str:
        return classify_language(lang, self.groups)

    def initial_check(self) -> None:
        """训练开始前用初始 EMA(=0) 检查一次，tau = 0 时所有组从第 0 步起无提示"""
        with self.lock:
            for gid, state in self.states.items():
                self.states[gid] = check_switch(state, 0, self.tau)
                if self.states[gid].switched:
                    logger.info(f"分组 {gid} 在训练开始前切换到零提示（tau={self.tau}）")

    def ratio(self, gid: str, schedule: DecaySchedule, t: int) -> float:
        with self.lock:
            state = self.states[gid]
        return effective_ratio(schedule, t, state)

    def observe(self, t: int, advantages_by_group: Mapping[str, Sequence[Sequence[float]]]) -> Dict[str, Optional[float]]:
        """
        用本步 rollout 的优势值更新各组 u / EMA 并检查切换
        本步 batch 中没有实例的分组跳过更新，返回值中对应 u 为 None
        """
        raw = {}
        with self.lock:
            for gid in self.group_ids:
                instances = advantages_by_group.get(gid) or []
                if not instances:
                    raw[gid] = None
                    continue
                u = effective_update_rate(instances)
                raw[gid] = u
                state = ema_update(self.states[gid], u, self.alpha)
                was_switched = state.switched
                state = check_switch(state, t, self.tau)
                if state.switched and not was_switched:
                    logger.info(f"分组 {gid} 在第 {t} 步切换到零提示，ema={state.ema:.4f} >= tau={self.tau}")
                self.states[gid] = state
        return raw

    def snapshot(self) -> Dict[str, SwitchState]:
        with self.lock:
            return dict(self.states)

    def switch_steps(self) -> Dict[str, Optional[int]]:
        return {gid: state.switch_step for gid, state in self.snapshot().items()}
