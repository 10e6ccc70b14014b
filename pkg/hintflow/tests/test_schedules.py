# -*- coding: utf-8 -*-
"""提示衰减调度测试"""

import math

import numpy as np
import pytest

from hintflow.utils.errors import DomainError
from hintflow.utils.schedules import (
    DecaySchedule,
    Question,
    TeacherTrace,
    build_hinted_prompt,
    format_preview_csv,
    hint_prefix_len,
    hint_ratio,
    schedule_preview,
)


class TestHintRatio:
    """hint_ratio 的取值与单调性"""

    def test_cosine_values(self):
        s = DecaySchedule('cosine', 100)
        assert hint_ratio(s, 0) == pytest.approx(1.0), "t=0 时余弦衰减应为 1"
        assert hint_ratio(s, 50) == pytest.approx(0.5), "t=T/2 时余弦衰减应为 0.5"
        assert hint_ratio(s, 150) == 0.0, "t > T 后应截断为 0"

    def test_exponential_value(self):
        s = DecaySchedule('exponential', 100, rate_lambda=6.0)
        assert hint_ratio(s, 50) == pytest.approx(0.049787, abs=1e-6), "exp(-3) 约为 0.049787"

    def test_linear_value(self):
        assert hint_ratio(DecaySchedule('linear', 100), 25) == pytest.approx(0.75), "线性衰减 1 - 0.25"

    def test_constant_never_decays(self):
        s = DecaySchedule('constant', 10)
        assert all(hint_ratio(s, t) == 1.0 for t in range(0, 50)), "constant 调度恒为 1"

    def test_closed_form(self):
        T = 100
        for t in range(0, 2 * T + 1):
            x = t / T
            expected = {
                'cosine': 0.5 * (1 + math.cos(math.pi * x)),
                'linear': 1 - x,
                'exponential': math.exp(-6.0 * x),
            }
            for kind, value in expected.items():
                want = value if t <= T else 0.0
                got = hint_ratio(DecaySchedule(kind, T), t)
                assert abs(got - max(0.0, min(1.0, want))) <= 1e-12, f"{kind} t={t}"

    def test_monotone_and_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            kind = str(rng.choice(['cosine', 'linear', 'exponential']))
            T = int(rng.integers(1, 500))
            t1, t2 = sorted(int(x) for x in rng.integers(0, 2 * T, size=2))
            s = DecaySchedule(kind, T, rate_lambda=float(rng.uniform(0.1, 10)))
            p1, p2 = hint_ratio(s, t1), hint_ratio(s, t2)
            assert 0.0 <= p2 <= p1 <= 1.0, f"{kind} T={T} t1={t1} t2={t2}: {p1} {p2}"

    def test_negative_step_rejected(self):
        with pytest.raises(DomainError):
            hint_ratio(DecaySchedule(), -1)

    def test_invalid_schedule(self):
        with pytest.raises(DomainError):
            DecaySchedule('cosine', 0)
        with pytest.raises(DomainError):
            DecaySchedule('exponential', 10, rate_lambda=0.0)
        with pytest.raises(DomainError):
            DecaySchedule('step', 10)


class TestHintPrefix:
    """提示前缀长度与 prompt 拼接"""

    @pytest.mark.parametrize("ratio, L, k", [(0.37, 10, 3), (1.0, 7, 7), (0.0, 7, 0), (0.5, 7, 3), (0.29999999999, 10, 2)])
    def test_prefix_len_examples(self, ratio, L, k):
        assert hint_prefix_len(ratio, L) == k, f"floor({ratio} * {L})"

    def test_prefix_len_bounds(self):
        with pytest.raises(DomainError):
            hint_prefix_len(1.2, 10)
        with pytest.raises(DomainError):
            hint_prefix_len(-0.1, 10)

    def test_prefix_len_monotone(self):
        values = [hint_prefix_len(r, 24) for r in np.linspace(0, 1, 101)]
        assert values == sorted(values), "k 应随比例单调不减"
        assert all(0 <= k <= 24 for k in values)

    def test_build_prompt(self):
        q = Question((100, 101), 'th')
        h = TeacherTrace((1, 2, 3, 4), 'th')
        prompt = build_hinted_prompt(q, h, 2)
        assert prompt.tokens == (100, 101, 1, 2), "题目后接前 k 个教师 token"
        assert prompt.hint_fraction == 0.5
        assert build_hinted_prompt(q, h, 0).tokens == q.tokens, "k=0 即原题"

    def test_full_trace_prefix(self):
        q = Question((9,), 'de')
        h = TeacherTrace((1, 2, 3, 4, 5), 'de')
        prompt = build_hinted_prompt(q, h, 5)
        assert prompt.hint_tokens == h.tokens
        assert prompt.tokens[len(q.tokens):] == h.tokens, "去掉题目部分应得到完整教师轨迹"

    def test_build_prompt_errors(self):
        q = Question((1,), 'ja')
        with pytest.raises(DomainError):
            build_hinted_prompt(q, TeacherTrace((1, 2), 'zh'), 1)
        with pytest.raises(DomainError):
            build_hinted_prompt(q, TeacherTrace((1, 2), 'ja'), 3)


class TestPreview:
    """schedule-preview 的 CSV 输出"""

    def test_csv_shape(self):
        rows = schedule_preview(DecaySchedule('cosine', 4), 4)
        text = format_preview_csv(rows)
        lines = text.strip().split('\n')
        assert lines[0] == 't,p'
        assert len(lines) == 6, "表头 + t=0..4"
        assert lines[1] == '0,1'
        assert lines[-1] == '4,0'
