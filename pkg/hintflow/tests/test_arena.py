# -*- coding: utf-8 -*-
"""合成环境测试：题目生成、因子化 rollout、评分与期望奖励 oracle"""

import math

import numpy as np
import pytest
from scipy.special import softmax

from hintflow.utils.arena import Arena, ArenaSpec, LanguageSpec, Task, TierSpec, rng_for
from hintflow.utils.errors import DomainError
from hintflow.utils.grpo import Outcome, answer_logits, language_logits
from hintflow.utils.schedules import TeacherTrace


def ideal_policy(arena):
    """格式、推理语言、答案三个因子都以很大的 logit 差值取到正确值"""
    policy = arena.init_policy()
    policy.format_logit = 50.0
    policy.lang_logits += 100.0 * np.eye(len(arena.language_ids))
    for fam, correct in enumerate(arena.answer_key):
        policy.answer_logits[:, fam, correct] += 100.0
    return policy


def make_task(arena, lang, tier='low', family=0):
    L = arena.spec.teacher_len
    return Task(id=0, language=lang, tier=tier, family=family, correct_answer=arena.answer_key[family],
                teacher=TeacherTrace(tuple(range(L)), lang))


def mc_reward(arena, policy, task, k, n, seed):
    rng = np.random.default_rng(seed)
    total = 0
    for _ in range(n):
        total += arena.score_outcome(arena.rollout(policy, task, k, rng), task).r
    return total / n


class TestTasks:
    def test_deterministic(self):
        arena = Arena()
        assert arena.make_tasks(50, 3) == arena.make_tasks(50, 3)
        assert arena.make_tasks(50, 3) != arena.make_tasks(50, 4)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            Arena().make_tasks(0, 0)

    def test_task_contents(self):
        arena = Arena()
        for task in arena.make_tasks(100, 0):
            assert task.correct_answer == arena.answer_key[task.family]
            assert task.teacher.length == arena.spec.teacher_len
            assert arena.detect_language(task.teacher.tokens) == task.language, "教师轨迹在题目语言子空间内"
            assert task.question.language == task.language

    def test_stratified_cells(self):
        arena = Arena()
        tasks = arena.make_tasks(48, 0, stratified=True)
        cells = {}
        for task in tasks:
            cells[(task.language, task.tier)] = cells.get((task.language, task.tier), 0) + 1
        assert len(cells) == 24
        assert set(cells.values()) == {2}

    def test_rng_streams(self):
        a = rng_for(0, 3, 1, 2).random(4)
        b = rng_for(0, 3, 2, 1).random(4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, rng_for(0, 3, 1, 2).random(4))


class TestArenaSpec:
    def test_invalid(self):
        with pytest.raises(DomainError):
            ArenaSpec(pivot='xx')
        with pytest.raises(DomainError):
            ArenaSpec(K=1)
        with pytest.raises(DomainError):
            ArenaSpec(languages=(LanguageSpec('en'), LanguageSpec('en')))


class TestRollout:
    def test_k_range(self):
        arena = Arena()
        task = make_task(arena, 'th')
        with pytest.raises(DomainError):
            arena.features(task, arena.spec.teacher_len + 1)

    def test_zero_hint_ignores_gains(self):
        base = Arena()
        no_gain = Arena(ArenaSpec(lang_gain=0.0, answer_gain=0.0))
        task = make_task(base, 'ja', 'high', 1)
        policy = base.init_policy()
        for seed in range(20):
            a = base.rollout(policy, task, 0, np.random.default_rng(seed))
            b = no_gain.rollout(policy, task, 0, np.random.default_rng(seed))
            assert a == b

    def test_saturated_hint(self):
        arena = Arena(ArenaSpec(lang_gain=60.0, answer_gain=60.0))
        policy = arena.init_policy()
        for lang in arena.language_ids:
            for tier in arena.spec.tier_names:
                task = make_task(arena, lang, tier)
                f = arena.features(task, arena.spec.teacher_len)
                p_lang = softmax(language_logits(policy, f))[f.input_language]
                p_ans = softmax(answer_logits(policy, f, f.input_language))[f.correct_answer]
                assert p_lang >= 1 - 1e-6 and p_ans >= 1 - 1e-6, f"{lang}/{tier}"

    def test_content_in_reasoning_subspace(self):
        arena = Arena()
        policy = arena.init_policy()
        rng = np.random.default_rng(0)
        for task in arena.make_tasks(40, 1):
            for k in (0, 12, 24):
                outcome = arena.rollout(policy, task, k, rng)
                assert len(outcome.content_tokens) == arena.spec.m
                assert arena.detect_language(outcome.content_tokens) == arena.language_ids[outcome.reasoning_language]

    def test_initial_drift_toward_pivot(self):
        arena = Arena()
        policy = arena.init_policy()
        for lang in arena.language_ids:
            if lang == arena.spec.pivot:
                continue
            p = softmax(language_logits(policy, arena.features(make_task(arena, lang), 0)))
            assert p[arena.pivot] > p[arena.lang_index[lang]], f"{lang} 初始应更偏向枢纽语言"

    def test_serialization_length(self):
        arena = Arena()
        outcome = arena.rollout(arena.init_policy(), make_task(arena, 'de'), 0, np.random.default_rng(0))
        tokens = arena.serialize_outcome(outcome)
        assert len(tokens) == arena.spec.m + 3 == 15


class TestScoring:
    def test_examples(self):
        arena = Arena()
        task = make_task(arena, 'th')
        th = arena.vocab_offsets[arena.lang_index['th']]
        good = Outcome(True, arena.lang_index['th'], (th, th + 1, th + 2), task.correct_answer)
        drift = Outcome(True, arena.pivot, (0, 1, 2), task.correct_answer)
        bad = Outcome(False, arena.lang_index['th'], (th,), task.correct_answer)
        assert arena.score_outcome(good, task).to_dict() == {'r_lc': 1, 'r_format': 1, 'r_acc': 1, 'r': 1}
        assert arena.score_outcome(drift, task).to_dict() == {'r_lc': 0, 'r_format': 1, 'r_acc': 1, 'r': 0}
        assert arena.score_outcome(bad, task).r == 0

    def test_without_language_term(self):
        arena = Arena()
        task = make_task(arena, 'th')
        drift = Outcome(True, arena.pivot, (0, 1, 2), task.correct_answer)
        assert arena.score_outcome(drift, task, require_lc=False).r == 1


class TestExpectedReward:
    def test_ideal_policy(self):
        arena = Arena()
        policy = ideal_policy(arena)
        for task in arena.make_tasks(30, 2):
            assert arena.expected_reward(policy, task, 0) == pytest.approx(1.0, abs=1e-9)

    def test_uniform_policy(self):
        spec = ArenaSpec(languages=(LanguageSpec('en', 4, 0.0), LanguageSpec('th', 4, 0.0)), pivot='en',
                         drift_bias=0.0, tiers=(TierSpec('low', 0.0),), K=4, families=1, format_init=0.0)
        arena = Arena(spec)
        task = make_task(arena, 'th')
        assert arena.expected_reward(arena.init_policy(), task, 0) == pytest.approx(0.0625, abs=1e-12)

    def test_monotone_in_hint(self):
        arena = Arena()
        rng = np.random.default_rng(6)
        policy = arena.init_policy()
        policy = policy.from_flat(policy.flat() + rng.normal(0, 0.5, size=policy.size))
        for task in arena.make_tasks(20, 5):
            values = [arena.expected_reward(policy, task, k) for k in range(arena.spec.teacher_len + 1)]
            assert all(b >= a - 1e-15 for a, b in zip(values, values[1:]))

    def test_initial_order_follows_competence(self):
        arena = Arena()
        policy = arena.init_policy()
        ranked = sorted(arena.spec.languages, key=lambda lang: -lang.competence)
        values = [arena.expected_reward(policy, make_task(arena, lang.id), 0) for lang in ranked]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_matches_monte_carlo(self):
        self._check_monte_carlo(triples=4, n=10000)

    @pytest.mark.slow
    def test_matches_monte_carlo_full(self):
        self._check_monte_carlo(triples=20, n=100000)

    def _check_monte_carlo(self, triples, n):
        arena = Arena()
        rng = np.random.default_rng(2024)
        tasks = arena.make_tasks(triples, 9)
        for i, task in enumerate(tasks):
            policy = arena.init_policy()
            policy = policy.from_flat(policy.flat() + rng.normal(0, 1.0, size=policy.size))
            k = int(rng.integers(0, arena.spec.teacher_len + 1))
            p = arena.expected_reward(policy, task, k)
            estimate = mc_reward(arena, policy, task, k, n, seed=100 + i)
            bound = 4 * math.sqrt(p * (1 - p) / n)
            assert abs(estimate - p) <= bound, f"三元组 {i}: oracle={p:.5f} MC={estimate:.5f}"
