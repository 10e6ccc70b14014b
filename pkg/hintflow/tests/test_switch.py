# -*- coding: utf-8 -*-
"""语言自适应开关测试"""

import numpy as np
import pytest

from hintflow.utils.errors import ConfigError, ConfigValidationError, DomainError
from hintflow.utils.config import load_config
from hintflow.utils.schedules import DecaySchedule
from hintflow.utils.switch import (
    LanguageAdaptiveSwitch,
    LanguageGroup,
    SwitchState,
    check_switch,
    classify_language,
    default_groups,
    effective_ratio,
    effective_update_rate,
    ema_update,
    validate_groups,
)


class TestEffectiveUpdateRate:
    def test_examples(self):
        assert effective_update_rate([[1.0, -1.0], [0, 0], [0, 0]]) == pytest.approx(1 / 3)
        assert effective_update_rate([[0, 0], [0, 0]]) == 0.0
        assert effective_update_rate([[0.5, -0.5], [2.0, -1.0, -1.0]]) == 1.0

    def test_empty_batch(self):
        with pytest.raises(DomainError):
            effective_update_rate([])


class TestEma:
    def test_examples(self):
        assert ema_update(SwitchState(ema=0.2), 0.6, 0.5).ema == pytest.approx(0.4)
        assert ema_update(SwitchState(ema=0.3), 0.3, 0.5).ema == pytest.approx(0.3), "不动点"
        assert ema_update(SwitchState(ema=0.0), 1.0, 0.0).ema == 1.0, "alpha=0 直接取 u"

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            ema_update(SwitchState(), 1.5, 0.5)
        with pytest.raises(DomainError):
            ema_update(SwitchState(), 0.5, 1.0)

    def test_stays_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            state = SwitchState()
            alpha = float(rng.uniform(0, 0.99))
            for u in rng.random(50):
                state = ema_update(state, float(u), alpha)
                assert 0.0 <= state.ema <= 1.0


class TestCheckSwitch:
    def _run(self, series, tau):
        state = SwitchState()
        for t, ema in enumerate(series):
            state = check_switch(SwitchState(ema=ema, switch_step=state.switch_step), t, tau)
        return state

    def test_first_crossing(self):
        assert self._run([0.1, 0.3, 0.45], 0.4).switch_step == 2

    def test_tau_zero(self):
        assert check_switch(SwitchState(), 0, 0.0).switch_step == 0, "tau=0 首次检查即切换"

    def test_never(self):
        assert self._run([0.1, 0.2, 0.3, 0.39], 0.4).switch_step is None

    def test_permanent(self):
        state = self._run([0.5, 0.0, 0.0], 0.4)
        assert state.switch_step == 0, "切换后 EMA 下降也不回退"


class TestEffectiveRatio:
    def test_examples(self):
        s = DecaySchedule('cosine', 100)
        assert effective_ratio(s, 10, SwitchState(switch_step=3)) == 0.0
        assert effective_ratio(s, 10, SwitchState()) == pytest.approx(0.975528, abs=1e-6)
        assert effective_ratio(s, 101, SwitchState()) == 0.0


class TestGroups:
    def test_default_classification(self):
        groups = default_groups()
        assert classify_language('en', groups) == 'high'
        assert classify_language('ja', groups) == 'mid'
        assert classify_language('th', groups) == 'low'

    def test_unknown_language(self):
        with pytest.raises(ConfigError):
            classify_language('xx', default_groups())

    def test_overlap_rejected(self):
        groups = [LanguageGroup('high', frozenset({'en'})), LanguageGroup('low', frozenset({'en', 'th'}))]
        with pytest.raises(ConfigValidationError) as info:
            validate_groups(groups, ['en', 'th'])
        assert info.value.key == 'groups'

    def test_uncovered_language_rejected(self):
        with pytest.raises(ConfigValidationError):
            validate_groups([LanguageGroup('high', frozenset({'en'}))], ['en', 'th'])


class TestLanguageAdaptiveSwitch:
    """训练循环中使用的有状态开关"""

    def _switch(self, tau=0.4):
        return LanguageAdaptiveSwitch(
            [LanguageGroup('high', frozenset({'en'})), LanguageGroup('low', frozenset({'th'}))], alpha=0.5, tau=tau)

    def test_absent_group_skipped(self):
        sw = self._switch()
        raw = sw.observe(0, {'high': [[1.0, -1.0]]})
        assert raw == {'high': 1.0, 'low': None}
        states = sw.snapshot()
        assert states['high'].ema == pytest.approx(0.5)
        assert states['low'] == SwitchState(), "未出现的分组状态不变"

    def test_switch_then_zero_ratio(self):
        sw = self._switch()
        schedule = DecaySchedule('constant', 10)
        sw.observe(0, {'high': [[1.0, -1.0]], 'low': [[0.0, 0.0]]})
        assert sw.switch_steps() == {'high': 0, 'low': None}
        assert sw.ratio('high', schedule, 1) == 0.0
        assert sw.ratio('low', schedule, 1) == 1.0
        sw.observe(1, {'high': [[0.0, 0.0]] * 4})
        assert sw.switch_steps()['high'] == 0, "切换不可逆"

    def test_initial_check_tau_zero(self):
        sw = self._switch(tau=0.0)
        sw.initial_check()
        assert sw.switch_steps() == {'high': 0, 'low': 0}
        assert sw.ratio('low', DecaySchedule('constant', 5), 0) == 0.0

    def test_large_tau_never_switches(self):
        sw = self._switch(tau=1.5)
        sw.initial_check()
        for t in range(20):
            sw.observe(t, {'high': [[1.0, -1.0]], 'low': [[1.0, -1.0]]})
        assert sw.switch_steps() == {'high': None, 'low': None}

    def test_default_alpha_delays_switch(self):
        config = load_config()
        sw = LanguageAdaptiveSwitch(config.groups, alpha=config.hyper.alpha, tau=config.hyper.tau)
        sw.initial_check()
        for t in range(4):
            sw.observe(t, {'high': [[1.0, -1.0]]})
        assert sw.switch_steps()['high'] is None, "单批 u=1 不足以触发切换，0.9 的 EMA 需要 5 批"
        sw.observe(4, {'high': [[1.0, -1.0]]})
        assert sw.switch_steps()['high'] == 4
        assert sw.switch_steps()['low'] is None

    def test_invalid_parameters(self):
        with pytest.raises(DomainError):
            LanguageAdaptiveSwitch(default_groups(), alpha=1.0)
        with pytest.raises(DomainError):
            LanguageAdaptiveSwitch(default_groups(), tau=-0.1)
