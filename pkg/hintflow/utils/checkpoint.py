# -*- coding: utf-8 -*-
"""
策略检查点读写

二进制文件按段依次存放：ASCII 段头 "名称 维数 各维大小\\n"，随后是小端 float64 数据
同目录写一个文本清单，列出段名、形状与整个文件的 sha256
"""

import hashlib
import logging
import os
from typing import Dict, Optional

import numpy as np

from .errors import CheckpointError
from .grpo import SECTIONS, PolicyParams

logger = logging.getLogger(__name__)

_DTYPE = np.dtype('<f8')


def manifest_path(path: str) -> str:
    return os.path.splitext(path)[0] + '.manifest.txt'


def _file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _shape_text(shape) -> str:
    return 'x'.join(str(d) for d in shape) if shape else 'scalar'


def save_checkpoint(policy: PolicyParams, path: str) -> str:
    """写检查点与清单，返回 sha256"""
    sections = policy.sections()
    with open(path, 'wb') as f:
        for name in SECTIONS:
            arr = np.asarray(sections[name], dtype=_DTYPE)
            header = ' '.join([name, str(arr.ndim)] + [str(d) for d in arr.shape]) + '\n'
            f.write(header.encode('ascii'))
            f.write(arr.tobytes())
    sha = _file_sha256(path)
    lines = ['# hintflow policy checkpoint']
    lines += [f"{name} {_shape_text(np.shape(sections[name]))}" for name in SECTIONS]
    lines.append(f"sha256 {sha}")
    with open(manifest_path(path), 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')
    logger.info(f"检查点已保存: {path} (sha256={sha[:12]})")
    return sha


def _read_manifest_sha(path: str) -> Optional[str]:
    mpath = manifest_path(path)
    if not os.path.exists(mpath):
        return None
    with open(mpath, 'r', encoding='utf-8') as f:
        for line in f:
            parts = line.split()
            if len(parts) == 2 and parts[0] == 'sha256':
                return parts[1]
    raise CheckpointError(f"清单缺少 sha256 行: {mpath}")


def read_sections(path: str) -> Dict[str, np.ndarray]:
    if not os.path.exists(path):
        raise CheckpointError(f"检查点不存在: {path}")
    expected_sha = _read_manifest_sha(path)
    if expected_sha is not None and _file_sha256(path) != expected_sha:
        raise CheckpointError(f"检查点校验和与清单不一致: {path}")

    with open(path, 'rb') as f:
        data = f.read()
    sections = {}
    pos = 0
    while pos < len(data):
        nl = data.find(b'\n', pos)
        if nl < 0:
            raise CheckpointError(f"段头不完整，偏移 {pos}")
        try:
            fields = data[pos:nl].decode('ascii').split()
            name, ndim = fields[0], int(fields[1])
            shape = tuple(int(d) for d in fields[2:])
        except (UnicodeDecodeError, IndexError, ValueError):
            raise CheckpointError(f"无法解析段头，偏移 {pos}")
        if len(shape) != ndim:
            raise CheckpointError(f"段 {name} 维数与形状不符")
        count = int(np.prod(shape)) if shape else 1
        start = nl + 1
        end = start + count * _DTYPE.itemsize
        if end > len(data):
            raise CheckpointError(f"段 {name} 数据被截断")
        sections[name] = np.frombuffer(data, dtype=_DTYPE, count=count, offset=start).reshape(shape).copy()
        pos = end
    missing = [name for name in SECTIONS if name not in sections]
    if missing:
        raise CheckpointError(f"检查点缺少段: {', '.join(missing)}")
    return sections


def load_checkpoint(path: str, template: PolicyParams) -> PolicyParams:
    """按模板（由当前配置初始化的策略）校验形状后载入"""
    sections = read_sections(path)
    for name, expected in template.sections().items():
        actual = sections[name].shape
        if actual != np.shape(expected):
            raise CheckpointError(
                f"段 {name} 形状 {_shape_text(actual)} 与配置要求 {_shape_text(np.shape(expected))} 不一致")
    policy = PolicyParams.from_sections(sections, template.vocab_sizes)
    if not policy.is_finite():
        raise CheckpointError(f"检查点含非有限值: {path}")
    return policy
