#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
hintflow 启动脚本
打印运行环境后转交命令行，不带参数时启动奖励评分服务
"""

import os
import signal
import sys

# 添加项目路径
sys.path.append(os.path.dirname(os.path.abspath(__file__)))


def signal_handler(signum, frame):
    """信号处理器"""
    print("\n\n收到停止信号，正在退出...")
    sys.exit(0)


def check_environment():
    """检查依赖包是否可导入"""
    status = {}
    for module in ('numpy', 'scipy', 'yaml', 'easydict', 'jsonschema', 'pandas', 'joblib', 'flask'):
        try:
            __import__(module)
            status[module] = True
        except ImportError:
            status[module] = False
    try:
        __import__('langdetect')
        status['langdetect (可选)'] = True
    except ImportError:
        status['langdetect (可选)'] = False
    return status


def main():
    """主启动函数"""
    print("=" * 80)
    print("hintflow - 语言自适应提示衰减 GRPO")
    print("=" * 80)

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    from hintflow.utils.harness import get_system_info, thread_count

    print("\n系统信息:")
    for key, value in get_system_info().items():
        print(f"  {key}: {value}")
    print(f"  rollout 线程数: {thread_count() or '单线程（确定性模式）'}")

    print("\n依赖检查:")
    missing = []
    for name, ok in check_environment().items():
        print(f"  {'✓' if ok else '✗'} {name}")
        if not ok and '可选' not in name:
            missing.append(name)
    if missing:
        print(f"\n❌ 缺少依赖: {', '.join(missing)}，请先执行 pip install -r requirements.txt")
        sys.exit(1)
    print("=" * 80)

    from hintflow.cli import main as cli_main

    args = sys.argv[1:] or ['serve']
    cli_main(args=args, prog_name='hintflow')


if __name__ == "__main__":
    main()
