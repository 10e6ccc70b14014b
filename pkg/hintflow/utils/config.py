# -*- coding: utf-8 -*-
"""
运行配置
按 包内默认配置 -> 预置 -> 用户配置文件 -> 命令行覆盖 的顺序深度合并，
jsonschema 做结构校验（拒绝未知键），其余约束在代码中检查
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional

import yaml
from easydict import EasyDict
from jsonschema import Draft7Validator

from .arena import ArenaSpec, LanguageSpec, TierSpec
from .errors import ConfigFileNotFound, ConfigSyntaxError, ConfigValidationError, DomainError
from .grpo import TrainHyper
from .schedules import SCHEDULE_KINDS, DecaySchedule
from .switch import GROUP_IDS, LanguageGroup, validate_groups

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config')
DEFAULT_CONFIG_PATH = os.path.join(CONFIG_DIR, 'hintflow_config.yaml')
PRESETS_PATH = os.path.join(CONFIG_DIR, 'presets.yaml')

PRESET_NAMES = ('vanilla', 'fixed-hint', 'cosine', 'lang')


def _obj(properties, required=()):
    return {'type': 'object', 'properties': properties, 'required': list(required), 'additionalProperties': False}


_INT_POS = {'type': 'integer', 'minimum': 1}
_NUMBER = {'type': 'number'}

CONFIG_SCHEMA = _obj({
    'seed': {'type': 'integer', 'minimum': 0},
    'steps': {'type': 'integer', 'minimum': 0},
    'batch_tasks': _INT_POS,
    'minibatch': _INT_POS,
    'eval_every': _INT_POS,
    'eval_tasks': _INT_POS,
    'train_tasks': _INT_POS,
    'out_dir': {'type': 'string', 'minLength': 1},
    'schedule': _obj({
        'kind': {'enum': list(SCHEDULE_KINDS)},
        'horizon_T': _INT_POS,
        'rate_lambda': {'type': 'number', 'exclusiveMinimum': 0},
    }),
    'hyper': _obj({
        'clip_eps': {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 1},
        'kl_beta': {'type': 'number', 'const': 0},
        'lr': {'type': 'number', 'exclusiveMinimum': 0},
        'group_size': {'type': 'integer', 'minimum': 2},
        'alpha': {'type': 'number', 'minimum': 0, 'exclusiveMaximum': 1},
        'tau': {'type': 'number', 'minimum': 0},
    }),
    'reward': _obj({
        'require_lc': {'type': 'boolean'},
    }),
    'arena': _obj({
        'languages': {
            'type': 'array',
            'minItems': 1,
            'items': _obj({
                'id': {'type': 'string', 'minLength': 1},
                'vocab_size': _INT_POS,
                'competence': _NUMBER,
            }, required=('id',)),
        },
        'pivot': {'type': 'string'},
        'drift_bias': _NUMBER,
        'tiers': {
            'type': 'array',
            'minItems': 1,
            'items': _obj({
                'name': {'type': 'string', 'minLength': 1},
                'offset': _NUMBER,
            }, required=('name',)),
        },
        'K': {'type': 'integer', 'minimum': 2},
        'families': _INT_POS,
        'm': _INT_POS,
        'teacher_len': _INT_POS,
        'lang_gain': {'type': 'number', 'minimum': 0},
        'answer_gain': {'type': 'number', 'minimum': 0},
        'format_init': _NUMBER,
        'answer_key_seed': {'type': 'integer', 'minimum': 0},
    }),
    'groups': {
        'type': 'object',
        'propertyNames': {'enum': list(GROUP_IDS)},
        'additionalProperties': {'type': 'array', 'items': {'type': 'string'}},
    },
})

_validator = Draft7Validator(CONFIG_SCHEMA)


@dataclass
class RunConfig:
    """合并、校验后的运行配置；raw 为合并后的原始配置树"""
    arena: ArenaSpec
    schedule: DecaySchedule
    hyper: TrainHyper
    groups: List[LanguageGroup]
    steps: int
    batch_tasks: int
    minibatch: int
    eval_every: int
    eval_tasks: int
    train_tasks: int
    out_dir: str
    require_lc: bool
    raw: EasyDict
    preset: Optional[str] = None

    @property
    def seed(self) -> int:
        return self.hyper.seed

    def to_json(self) -> str:
        return json.dumps(self.raw, ensure_ascii=False, indent=2, sort_keys=True)

    def sha256(self) -> str:
        canonical = json.dumps(self.raw, ensure_ascii=False, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def deep_merge(base: Dict, update: Mapping) -> Dict:
    """字典递归合并，列表与标量整体覆盖"""
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def read_yaml(path: str, what: str = '配置文件') -> Dict:
    if not os.path.exists(path):
        raise ConfigFileNotFound(f"{what}不存在: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigSyntaxError(f"{what}解析失败: {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigSyntaxError(f"{what}顶层必须是映射: {path}")
    return data


def load_presets() -> Dict[str, Dict]:
    return read_yaml(PRESETS_PATH, '预置配置')


def _error_key(err) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == 'additionalProperties' and isinstance(err.instance, dict):
        known = set(err.schema.get('properties', {}))
        extra = sorted(k for k in err.instance if k not in known)
        if extra:
            path.append(extra[0])
    elif err.validator == 'propertyNames':
        path.append(str(err.instance))
    elif err.validator == 'required':
        missing = err.message.split("'")[1] if "'" in err.message else ''
        if missing:
            path.append(missing)
    return '.'.join(path) or '<root>'


def validate_tree(tree: Mapping) -> None:
    errors = sorted(_validator.iter_errors(tree), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise ConfigValidationError(err.message, key=_error_key(err))


def _build(tree: EasyDict, preset: Optional[str]) -> RunConfig:
    a = tree.arena
    try:
        arena = ArenaSpec(
            languages=tuple(LanguageSpec(**dict(lang)) for lang in a.languages),
            pivot=a.pivot,
            drift_bias=float(a.drift_bias),
            tiers=tuple(TierSpec(**dict(tier)) for tier in a.tiers),
            K=a.K,
            families=a.families,
            m=a.m,
            teacher_len=a.teacher_len,
            lang_gain=float(a.lang_gain),
            answer_gain=float(a.answer_gain),
            format_init=float(a.format_init),
            answer_key_seed=a.answer_key_seed,
        )
    except DomainError as e:
        raise ConfigValidationError(str(e), key='arena')
    tier_names = arena.tier_names
    if len(set(tier_names)) != len(tier_names):
        raise ConfigValidationError(f"档位名称重复: {tier_names}", key='arena.tiers')

    groups = [LanguageGroup(gid, frozenset(tree.groups[gid])) for gid in GROUP_IDS if gid in tree.groups]
    validate_groups(groups, arena.language_ids)

    h = tree.hyper
    hyper = TrainHyper(clip_eps=float(h.clip_eps), kl_beta=float(h.kl_beta), lr=float(h.lr),
                       group_size=int(h.group_size), alpha=float(h.alpha), tau=float(h.tau),
                       seed=int(tree.seed))
    if tree.train_tasks < tree.batch_tasks:
        raise ConfigValidationError(
            f"train_tasks={tree.train_tasks} 小于 batch_tasks={tree.batch_tasks}", key='train_tasks')
    samples = tree.batch_tasks * hyper.group_size
    if samples % tree.minibatch != 0:
        raise ConfigValidationError(
            f"minibatch={tree.minibatch} 不能整除 batch_tasks·G = {samples}", key='minibatch')

    s = tree.schedule
    schedule = DecaySchedule(kind=s.kind, horizon_T=int(s.horizon_T), rate_lambda=float(s.rate_lambda))

    return RunConfig(
        arena=arena,
        schedule=schedule,
        hyper=hyper,
        groups=groups,
        steps=int(tree.steps),
        batch_tasks=int(tree.batch_tasks),
        minibatch=int(tree.minibatch),
        eval_every=int(tree.eval_every),
        eval_tasks=int(tree.eval_tasks),
        train_tasks=int(tree.train_tasks),
        out_dir=tree.out_dir,
        require_lc=bool(tree.reward.require_lc),
        raw=tree,
        preset=preset,
    )


def load_config(path: Optional[str] = None, preset: Optional[str] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    读取并校验运行配置

    Args:
        path: 用户配置文件（YAML，JSON 亦可），None 时只用默认值
        preset: vanilla / fixed-hint / cosine / lang
        overrides: 命令行覆盖，如 {'seed': 3}

    Raises:
        ConfigFileNotFound / ConfigSyntaxError / ConfigValidationError
    """
    tree = read_yaml(DEFAULT_CONFIG_PATH, '默认配置')
    if preset is not None:
        presets = load_presets()
        if preset not in presets:
            raise ConfigValidationError(f"未知的预置: {preset}，可选 {', '.join(presets)}", key='preset')
        tree = deep_merge(tree, presets[preset])
    if path is not None:
        user = read_yaml(path)
        validate_tree(user)
        tree = deep_merge(tree, user)
    if overrides:
        tree = deep_merge(tree, {k: v for k, v in overrides.items() if v is not None})
    validate_tree(tree)
    config = _build(EasyDict(tree), preset)
    logger.debug(f"配置已加载: path={path} preset={preset} sha256={config.sha256()[:12]}")
    return config
