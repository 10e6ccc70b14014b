# -*- coding: utf-8 -*-
"""
hintflow 异常类型
所有模块抛出的业务异常都继承自 HintflowError，CLI 统一捕获后转换为单行错误信息
"""


class HintflowError(Exception):
    """hintflow 异常基类"""


class DomainError(HintflowError, ValueError):
    """输入不满足操作前置条件（取值越界、长度不符等）"""


class NumericError(HintflowError, ArithmeticError):
    """梯度或目标函数出现非有限值"""


class ConfigError(HintflowError):
    """配置错误基类"""

    def __init__(self, message, key=None):
        self.key = key
        if key:
            message = f"[{key}] {message}"
        super().__init__(message)


class ConfigFileNotFound(ConfigError):
    """配置文件不存在"""


class ConfigSyntaxError(ConfigError):
    """配置文件语法错误（YAML/JSON 解析失败）"""


class ConfigValidationError(ConfigError):
    """配置项未知或违反约束"""


class CheckpointError(HintflowError):
    """检查点缺失、损坏或与配置形状不一致"""


class CorpusError(HintflowError):
    """评测语料 JSONL 行格式错误"""

    def __init__(self, line_no, message):
        self.line_no = line_no
        if line_no is not None:
            message = f"第 {line_no} 行: {message}"
        super().__init__(message)
