# -*- coding: utf-8 -*-
"""
hintflow 命令行入口
"""

import functools
import logging

import click

from .utils.config import PRESET_NAMES, load_config
from .utils.errors import HintflowError
from .utils.schedules import SCHEDULE_KINDS, DEFAULT_RATE_LAMBDA, DecaySchedule, format_preview_csv, schedule_preview

logger = logging.getLogger(__name__)


def _handle_errors(fn):
    """业务异常转换为单行错误信息与非零退出码"""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HintflowError as e:
            logger.debug(f"{fn.__name__} 失败: {e!r}")
            raise click.ClickException(str(e))
    return wrapper


def _split_list(value: str):
    return [item.strip() for item in value.split(',') if item.strip()]


@click.group()
def main():
    """语言自适应提示衰减 GRPO：合成环境训练、评测与奖励服务"""


@main.command()
@click.option('--config', 'config_path', type=click.Path(), default=None, help='运行配置文件（YAML/JSON）')
@click.option('--seed', type=int, default=None, help='覆盖配置中的随机种子')
@click.option('--preset', type=click.Choice(PRESET_NAMES), default=None, help='预置对照配置')
@click.option('--out', 'out_dir', type=click.Path(), default=None, help='运行目录，默认取配置中的 out_dir')
@click.option('--no-progress', is_flag=True, help='关闭进度条')
@_handle_errors
def train(config_path, seed, preset, out_dir, no_progress):
    """训练并写出运行目录"""
    from .utils.harness import train as run_train

    config = load_config(config_path, preset=preset, overrides={'seed': seed})
    run_dir = run_train(config, out_dir, progress=not no_progress)
    click.echo(run_dir)


@main.command('eval')
@click.option('--checkpoint', type=click.Path(), required=True, help='策略检查点')
@click.option('--config', 'config_path', type=click.Path(), default=None, help='训练时使用的配置')
@click.option('--preset', type=click.Choice(PRESET_NAMES), default=None)
@click.option('--seed', type=int, default=None, help='评测题与评测 rollout 的种子')
@_handle_errors
def eval_command(checkpoint, config_path, preset, seed):
    """载入检查点做无提示评测，输出单行 JSON"""
    from .utils.harness import evaluate

    config = load_config(config_path, preset=preset)
    click.echo(evaluate(checkpoint, config, seed).to_json())


@main.command('eval-file')
@click.argument('corpus', type=click.Path())
@click.option('--per-record', type=click.Path(), default=None, help='逐条判定输出 JSONL')
@click.option('--skip-bad', is_flag=True, help='跳过格式错误的行而不是中止')
@click.option('--detector', type=click.Choice(['script', 'langdetect']), default='script', help='语言识别器')
@click.option('--n', 'ngram', type=int, default=1, show_default=True, help='重复分 n-gram 长度')
@click.option('--w', 'weight', type=float, default=1.0, show_default=True, help='重复分权重指数')
@_handle_errors
def eval_file_command(corpus, per_record, skip_bad, detector, ngram, weight):
    """对 JSONL 回答语料计算 LCR / Acc / LC&Acc 等指标"""
    from .utils.harness import eval_file

    report = eval_file(corpus, per_record=per_record, skip_bad=skip_bad, detector=detector, n=ngram, w=weight)
    click.echo(report.to_json())


@main.command('schedule-preview')
@click.option('--kind', type=click.Choice(SCHEDULE_KINDS), default='cosine', show_default=True)
@click.option('--horizon', type=int, required=True, help='提示关闭步数 T')
@click.option('--lambda', 'rate_lambda', type=float, default=DEFAULT_RATE_LAMBDA, show_default=True,
              help='指数衰减速率')
@click.option('--steps', type=int, required=True, help='输出 t = 0..steps')
@_handle_errors
def schedule_preview_command(kind, horizon, rate_lambda, steps):
    """输出提示比例曲线 CSV（表头 t,p）"""
    schedule = DecaySchedule(kind=kind, horizon_T=horizon, rate_lambda=rate_lambda)
    click.echo(format_preview_csv(schedule_preview(schedule, steps)), nl=False)


@main.command('export-csv')
@click.option('--run', 'run_dir', type=click.Path(), required=True, help='运行目录')
@click.option('--fields', required=True, help='逗号分隔的字段，如 step,entropy,u_by_group')
@click.option('--out', 'out_path', type=click.Path(), default=None, help='输出文件，缺省写到标准输出')
@_handle_errors
def export_csv_command(run_dir, fields, out_path):
    """运行日志导出为 CSV"""
    from .utils.harness import export_csv

    text = export_csv(run_dir, _split_list(fields), out_path)
    if not out_path:
        click.echo(text, nl=False)


@main.command('tau-sweep')
@click.option('--config', 'config_path', type=click.Path(), default=None)
@click.option('--taus', required=True, help='逗号分隔的 τ 值，如 0.2,0.4,0.6')
@click.option('--seed', type=int, default=None)
@click.option('--out', 'out_dir', type=click.Path(), default='runs/tau_sweep', show_default=True)
@_handle_errors
def tau_sweep_command(config_path, taus, seed, out_dir):
    """按 τ 扫描 lang 预置并汇总结果"""
    from .utils.harness import tau_sweep

    try:
        values = [float(x) for x in _split_list(taus)]
    except ValueError:
        raise click.BadParameter(f"无法解析: {taus}", param_hint='--taus')
    click.echo(tau_sweep(values, config_path, seed, out_dir))


@main.command()
@click.option('--host', default='0.0.0.0', show_default=True)
@click.option('--port', type=int, default=5000, show_default=True)
def serve(host, port):
    """启动奖励评分 HTTP 服务"""
    from .flask_app import create_app
    from .utils.harness import setup_logging

    setup_logging()
    create_app().run(host=host, port=port)


if __name__ == '__main__':
    main()
