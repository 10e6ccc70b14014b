# -*- coding: utf-8 -*-
import logging

import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行标记为 slow 的训练动态测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _reset_hintflow_logging():
    """每个测试结束后移除 hintflow 日志 handler，避免写入已关闭的捕获流或临时目录"""
    yield
    root = logging.getLogger('hintflow')
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
