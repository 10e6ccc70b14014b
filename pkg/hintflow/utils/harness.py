# -*- coding: utf-8 -*-
"""
训练与评测编排

每个 rollout batch 从优化步 t 开始：按分组有效提示比例构造提示前缀，冻结旧策略采样 G 条 rollout，
计算奖励与组内优势，更新各组 u / EMA / 切换状态，再分 minibatch 步做截断代理目标上升，
每个优化步写一条运行日志
"""

import json
import logging
import os
import platform
import time
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import psutil
from joblib import Parallel, delayed
from tqdm import tqdm

from .arena import (STREAM_BATCH, STREAM_EVAL_ROLLOUT, STREAM_EVAL_TASKS, STREAM_ROLLOUT,
                    STREAM_TRAIN_TASKS, Arena, Task, rng_for)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .errors import ConfigValidationError, DomainError, NumericError
from .grpo import PolicyParams, RolloutGroup, batch_surrogate_gradient, sgd_step, token_nll
from .language_detect import get_detector
from .metrics import MetricsRecord, arena_metrics, corpus_metrics, load_corpus, mean_response_length, \
    repeat_score_tokens
from .schedules import build_hinted_prompt, hint_prefix_len
from .switch import LanguageAdaptiveSwitch, classify_language

logger = logging.getLogger(__name__)

THREADS_ENV = 'HINTFLOW_THREADS'

RUN_LOG = 'run_log.jsonl'
CONFIG_COPY = 'config.json'
MANIFEST = 'manifest.json'
CHECKPOINT = 'policy.ckpt'
FINAL_EVAL = 'final_eval.json'
TRAIN_LOG = 'train.log'

SCALAR_FIELDS = ('step', 'batch', 'mean_reward', 'entropy', 'mean_len', 'repeat')
GROUP_FIELDS = ('mean_reward_by_group', 'u_by_group', 'ema_by_group', 'effective_ratio_by_group',
                'switched_by_group')
EVAL_FIELDS = ('lcr', 'acc', 'lc_acc', 'dw_acc')


def setup_logging(log_dir: Optional[str] = None, console_level=logging.INFO) -> logging.Logger:
    """
    配置 hintflow 根日志：控制台 INFO，log_dir 下 train.log 记录 DEBUG
    重复调用不会叠加 handler；换目录时替换文件 handler
    """
    root = logging.getLogger('hintflow')
    root.setLevel(logging.DEBUG)

    if not any(type(h) is logging.StreamHandler for h in root.handlers):
        console_handler = logging.StreamHandler()
        console_handler.setLevel(console_level)
        console_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
        root.addHandler(console_handler)

    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.abspath(os.path.join(log_dir, TRAIN_LOG))
        for h in [h for h in root.handlers if isinstance(h, logging.FileHandler)]:
            if h.baseFilename == log_file:
                return root
            root.removeHandler(h)
            h.close()
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        root.addHandler(file_handler)
    return root


def thread_count() -> int:
    """HINTFLOW_THREADS：rollout 并行线程数，未设置或 0 为单线程确定性模式"""
    value = os.environ.get(THREADS_ENV, '').strip()
    if not value:
        return 0
    try:
        n = int(value)
    except ValueError:
        raise ConfigValidationError(f"必须是非负整数: {value!r}", key=THREADS_ENV)
    if n < 0:
        raise ConfigValidationError(f"必须是非负整数: {value!r}", key=THREADS_ENV)
    return n


def get_system_info() -> Dict:
    """运行清单中记录的机器信息"""
    try:
        memory = psutil.virtual_memory()
        return {
            'cpu_cores': psutil.cpu_count(),
            'memory_total_gb': round(memory.total / (1024 ** 3), 2),
            'python': platform.python_version(),
            'platform': platform.platform(),
        }
    except Exception as e:
        logger.warning(f"获取系统信息失败: {e}")
        return {}


class RunLog:
    """追加写的 JSONL 运行日志，首次写入时才创建文件"""

    def __init__(self, path: str):
        self.path = path
        self._file = None

    def write(self, entry: Dict) -> None:
        if self._file is None:
            self._file = open(self.path, 'w', encoding='utf-8')
        self._file.write(json.dumps(entry, ensure_ascii=False) + '\n')
        self._file.flush()

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


def read_run_log(run_dir: str) -> List[Dict]:
    path = os.path.join(run_dir, RUN_LOG)
    if not os.path.exists(path):
        raise DomainError(f"运行日志不存在: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


# ---- rollout 与评测 -----------------------------------------------------------

def _rollout_task(arena: Arena, policy: PolicyParams, task: Task, ratio: float, group_size: int,
                  seed: int, batch_index: int, require_lc: bool) -> RolloutGroup:
    k = hint_prefix_len(ratio, task.teacher.length)
    prompt = build_hinted_prompt(task.question, task.teacher, k)
    outcomes = [arena.rollout(policy, task, k, rng_for(seed, STREAM_ROLLOUT, batch_index, task.id, i))
                for i in range(group_size)]
    rewards = [arena.score_outcome(o, task, require_lc).r for o in outcomes]
    return RolloutGroup(prompt=prompt, features=arena.features(task, k), outcomes=outcomes, rewards=rewards)


def _parallel(threads: int, jobs):
    if threads and threads > 1:
        return Parallel(n_jobs=threads, prefer='threads')(jobs)
    return [fn(*args, **kwargs) for fn, args, kwargs in jobs]


def evaluate_policy(arena: Arena, policy: PolicyParams, tasks: Sequence[Task], seed: int,
                    groups=None, threads: int = 0) -> MetricsRecord:
    """无提示（k = 0）评测，每道题一条 rollout，随机流由 (seed, task.id) 固定"""
    outcomes = _parallel(threads, [
        delayed(arena.rollout)(policy, task, 0, rng_for(seed, STREAM_EVAL_ROLLOUT, task.id)) for task in tasks
    ])
    group_of = None
    group_ids = ()
    if groups:
        group_ids = [g.id for g in groups]

        def group_of(lang):
            return classify_language(lang, groups)
    return arena_metrics(arena, tasks, outcomes, group_of, group_ids)


def make_eval_tasks(arena: Arena, config: RunConfig, seed: Optional[int] = None) -> List[Task]:
    """评测题使用独立随机流，id 接在训练题之后，与训练集不相交"""
    seed = config.seed if seed is None else seed
    return arena.make_tasks(config.eval_tasks, seed, STREAM_EVAL_TASKS, stratified=True,
                            id_offset=config.train_tasks)


def _eval_block(report: MetricsRecord) -> Dict:
    block = {'lcr': report.lcr, 'acc': report.acc, 'lc_acc': report.lc_acc}
    if report.dw_acc is not None:
        block['dw_acc'] = report.dw_acc
    block['lc_acc_by_group'] = report.lc_acc_by_group
    block['lc_acc_by_language'] = report.lc_acc_by_language
    return block


def _mean_or_none(values) -> Optional[float]:
    return float(np.mean(values)) if len(values) else None


# ---- 训练 ---------------------------------------------------------------------

def train(config: RunConfig, out_dir: Optional[str] = None, threads: Optional[int] = None,
          progress: bool = True) -> str:
    """
    训练并写出运行目录

    运行目录内容：
        config.json / manifest.json / policy.ckpt / policy.manifest.txt / train.log
        run_log.jsonl（steps > 0 时）/ final_eval.json（steps > 0 时）

    Returns:
        运行目录路径
    """
    run_dir = out_dir or config.out_dir
    os.makedirs(run_dir, exist_ok=True)
    setup_logging(run_dir)
    threads = thread_count() if threads is None else threads
    started = time.time()

    arena = Arena(config.arena)
    hyper = config.hyper
    seed = config.seed
    switch = LanguageAdaptiveSwitch(config.groups, alpha=hyper.alpha, tau=hyper.tau)
    group_ids = switch.group_ids
    policy = arena.init_policy()
    train_tasks = arena.make_tasks(config.train_tasks, seed, STREAM_TRAIN_TASKS)
    eval_tasks = make_eval_tasks(arena, config)

    with open(os.path.join(run_dir, CONFIG_COPY), 'w', encoding='utf-8') as f:
        f.write(config.to_json() + '\n')
    logger.info(f"开始训练: 预置={config.preset} steps={config.steps} seed={seed} "
                f"schedule={config.schedule.kind} tau={hyper.tau} threads={threads}")

    switch.initial_check()
    log = RunLog(os.path.join(run_dir, RUN_LOG))
    pbar = tqdm(total=config.steps, desc='训练', disable=not progress)
    t = 0
    batch_index = 0
    try:
        while t < config.steps:
            ratios = {gid: switch.ratio(gid, config.schedule, t) for gid in group_ids}
            picks = rng_for(seed, STREAM_BATCH, batch_index).choice(
                len(train_tasks), size=config.batch_tasks, replace=False)
            batch = [train_tasks[int(i)] for i in picks]
            old_policy = policy
            rollout_groups = _parallel(threads, [
                delayed(_rollout_task)(arena, old_policy, task, ratios[switch.group_of(task.language)],
                                       hyper.group_size, seed, batch_index, config.require_lc)
                for task in batch
            ])

            task_gids = [switch.group_of(task.language) for task in batch]
            advantages_by_group = {gid: [] for gid in group_ids}
            rewards_by_group = {gid: [] for gid in group_ids}
            for gid, group in zip(task_gids, rollout_groups):
                advantages_by_group[gid].append(group.advantages)
                rewards_by_group[gid].extend(group.rewards)
            raw_u = switch.observe(t, advantages_by_group)
            states = switch.snapshot()

            outcomes = [o for group in rollout_groups for o in group.outcomes]
            serialized = [arena.serialize_outcome(o) for o in outcomes]
            batch_stats = {
                'mean_reward': float(np.mean([r for group in rollout_groups for r in group.rewards])),
                'mean_reward_by_group': {gid: _mean_or_none(rewards_by_group[gid]) for gid in group_ids},
                'u_by_group': raw_u,
                'ema_by_group': {gid: states[gid].ema for gid in group_ids},
                'effective_ratio_by_group': ratios,
                'switched_by_group': {gid: states[gid].switched for gid in group_ids},
                'entropy': float(np.mean([token_nll(o) for o in outcomes])),
                'mean_len': mean_response_length(serialized),
                'repeat': float(np.mean([repeat_score_tokens(s) for s in serialized])),
            }

            samples = [s for group in rollout_groups for s in group.samples()]
            order = rng_for(seed, STREAM_BATCH, batch_index, 1).permutation(len(samples))
            for chunk in np.array_split(order, config.minibatch):
                if t >= config.steps:
                    break
                minibatch = [samples[int(i)] for i in chunk]
                try:
                    grad = batch_surrogate_gradient(policy, minibatch, hyper.clip_eps)
                    policy = sgd_step(policy, grad, hyper.lr)
                except NumericError as e:
                    log.write({'step': t, 'error': str(e)})
                    logger.error(f"第 {t} 步数值异常，训练中止: {e}")
                    raise
                entry = {'step': t, 'batch': batch_index}
                entry.update(batch_stats)
                if t % config.eval_every == 0:
                    entry['eval'] = _eval_block(evaluate_policy(arena, policy, eval_tasks, seed,
                                                                config.groups, threads))
                    logger.debug(f"第 {t} 步评测: lc_acc={entry['eval']['lc_acc']:.4f}")
                log.write(entry)
                t += 1
                pbar.update(1)
            batch_index += 1
    finally:
        pbar.close()
        log.close()

    ckpt_sha = save_checkpoint(policy, os.path.join(run_dir, CHECKPOINT))
    if config.steps > 0:
        final = evaluate_policy(arena, policy, eval_tasks, seed, config.groups, threads)
        with open(os.path.join(run_dir, FINAL_EVAL), 'w', encoding='utf-8') as f:
            f.write(final.to_json() + '\n')
        logger.info(f"最终无提示评测: {final.to_json()}")

    manifest = {
        'config_sha256': config.sha256(),
        'checkpoint_sha256': ckpt_sha,
        'seed': seed,
        'preset': config.preset,
        'steps': config.steps,
        'threads': threads,
        'switch_steps': switch.switch_steps(),
        'wall_time_sec': round(time.time() - started, 3),
        'system': get_system_info(),
    }
    with open(os.path.join(run_dir, MANIFEST), 'w', encoding='utf-8') as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2)
    logger.info(f"训练完成: {run_dir}，切换步 {manifest['switch_steps']}")
    return run_dir


# ---- 评测命令 -----------------------------------------------------------------

def evaluate(checkpoint: str, config: RunConfig, task_seed: Optional[int] = None,
             threads: Optional[int] = None) -> MetricsRecord:
    """载入检查点，在留出题上做无提示评测"""
    threads = thread_count() if threads is None else threads
    arena = Arena(config.arena)
    policy = load_checkpoint(checkpoint, arena.init_policy())
    seed = config.seed if task_seed is None else task_seed
    tasks = make_eval_tasks(arena, config, seed)
    return evaluate_policy(arena, policy, tasks, seed, config.groups, threads)


def eval_file(corpus_path: str, per_record: Optional[str] = None, skip_bad: bool = False,
              detector: str = 'script', n: int = 1, w: float = 1.0,
              threads: Optional[int] = None) -> MetricsRecord:
    """对外部 JSONL 回答语料计算指标，可选写出逐条判定"""
    threads = thread_count() if threads is None else threads
    records, skipped = load_corpus(corpus_path, skip_bad)
    if skipped:
        logger.warning(f"共跳过 {skipped} 行坏数据")
    report, verdicts = corpus_metrics(records, get_detector(detector), n, w, threads)
    if per_record:
        with open(per_record, 'w', encoding='utf-8') as f:
            for rec, v in zip(records, verdicts):
                row = {
                    'question': rec.question,
                    'lang': rec.question_language,
                    'response': rec.response,
                    'gold': rec.gold,
                    'tier': rec.tier,
                    'r_lc': v.r_lc,
                    'r_format': v.r_format,
                    'r_acc': v.r_acc,
                    'extracted': v.extracted,
                }
                f.write(json.dumps(row, ensure_ascii=False) + '\n')
    return report


def _field_columns(field: str, group_ids: Sequence[str]) -> List[str]:
    if field in SCALAR_FIELDS:
        return [field]
    if field in GROUP_FIELDS:
        base = field[:-len('_by_group')]
        return [f"{base}_{gid}" for gid in group_ids]
    if field.startswith('eval_') and field[len('eval_'):] in EVAL_FIELDS:
        return [field]
    raise DomainError(f"未知字段: {field}")


def export_csv(run_dir: str, fields: Sequence[str], out_path: Optional[str] = None) -> str:
    """
    运行日志导出为 CSV，每步一行
    分组字段展开为每组一列（u_high / u_mid / u_low），评测字段写作 eval_lc_acc 等，未评测的步留空
    """
    entries = [e for e in read_run_log(run_dir) if 'error' not in e]
    group_ids = list(entries[0]['u_by_group']) if entries else []
    columns = []
    for field in fields:
        columns.extend(_field_columns(field, group_ids))

    rows = []
    for entry in entries:
        row = {}
        for field in fields:
            if field in SCALAR_FIELDS:
                row[field] = entry.get(field)
            elif field in GROUP_FIELDS:
                base = field[:-len('_by_group')]
                for gid in group_ids:
                    value = entry[field].get(gid)
                    row[f"{base}_{gid}"] = int(value) if isinstance(value, bool) else value
            else:
                row[field] = entry.get('eval', {}).get(field[len('eval_'):])
        rows.append(row)

    text = pd.DataFrame(rows, columns=columns).to_csv(index=False, float_format='%.12g')
    if out_path:
        with open(out_path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    return text


def tau_sweep(taus: Sequence[float], config_path: Optional[str] = None, seed: Optional[int] = None,
              out_dir: str = 'runs/tau_sweep', threads: Optional[int] = None, progress: bool = False) -> str:
    """对每个 τ 训练一次 lang 预置，汇总最终评测与各组切换步到 tau_sweep.csv"""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for tau in taus:
        overrides = {'hyper': {'tau': float(tau)}}
        if seed is not None:
            overrides['seed'] = seed
        config = load_config(config_path, preset='lang', overrides=overrides)
        run_dir = train(config, os.path.join(out_dir, f"tau_{tau:g}"), threads, progress)
        row = {'tau': float(tau)}
        final_path = os.path.join(run_dir, FINAL_EVAL)
        if os.path.exists(final_path):
            with open(final_path, 'r', encoding='utf-8') as f:
                final = json.load(f)
            row.update(lc_acc=final['lc_acc'], lcr=final['lcr'], acc=final['acc'])
        with open(os.path.join(run_dir, MANIFEST), 'r', encoding='utf-8') as f:
            switch_steps = json.load(f)['switch_steps']
        for gid, step in switch_steps.items():
            row[f"switch_{gid}"] = step
        rows.append(row)
    path = os.path.join(out_dir, 'tau_sweep.csv')
    pd.DataFrame(rows).to_csv(path, index=False, float_format='%.12g')
    logger.info(f"τ 扫描结果已写出: {path}")
    return path
