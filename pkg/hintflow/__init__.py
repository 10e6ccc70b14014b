# -*- coding: utf-8 -*-
"""
hintflow
语言自适应提示衰减的 GRPO 训练机制，附带合成多语言环境与多语言评测工具
"""

__version__ = '0.1.0'
