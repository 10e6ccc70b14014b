# -*- coding: utf-8 -*-
"""
奖励评分接口
对单条回答计算 R_lc / R_format / R_acc 与合取奖励，或对一批记录计算评测指标
"""

import logging

from flask import Blueprint, current_app, jsonify, request

from hintflow import __version__
from hintflow.utils.errors import CorpusError, HintflowError
from hintflow.utils.language_detect import get_detector
from hintflow.utils.metrics import corpus_metrics, record_from_dict
from hintflow.utils.rewards import score_response, split_response

logger = logging.getLogger(__name__)

DETECTORS = ('script', 'langdetect')

#蓝图对象
rw = Blueprint("reward", __name__)


def _detector(data):
    name = data.get('detector') or current_app.config['HINTFLOW_DETECTOR']
    if name not in DETECTORS:
        raise ValueError(f"未知的语言识别器: {name}")
    return get_detector(name)


@rw.route('/api/health', methods=["GET"])
def health():
    return jsonify({'status': 'ok', 'version': __version__, 'detectors': list(DETECTORS)})


@rw.route('/api/reward', methods=["POST"])
def reward():
    """
    请求体: {"response": str, "lang": str, "gold": str, "require_lc": bool?, "detector": str?}
    返回: r_lc / r_format / r_acc / r 与抽取到的答案
    """
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        return jsonify({'error': '请求体必须是 JSON 对象'}), 400
    missing = [key for key in ('response', 'lang', 'gold') if not isinstance(data.get(key), str)]
    if missing:
        return jsonify({'error': f"缺少字段或类型错误: {', '.join(missing)}"}), 400
    require_lc = data.get('require_lc', True)
    if not isinstance(require_lc, bool):
        return jsonify({'error': 'require_lc 必须是布尔值'}), 400
    try:
        breakdown = score_response(data['response'], data['lang'], data['gold'],
                                   detector=_detector(data),
                                   require_lc=require_lc)
    except (HintflowError, ValueError) as e:
        return jsonify({'error': str(e)}), 400
    result = breakdown.to_dict()
    result['extracted'] = split_response(data['response']).boxed
    return jsonify(result)


@rw.route('/api/metrics', methods=["POST"])
def metrics():
    """
    请求体: {"records": [{question, lang, response, gold, tier?}, ...], "detector": str?}
    返回: 与 eval-file 相同字段的指标
    """
    data = request.get_json(silent=True)
    if not isinstance(data, dict) or not isinstance(data.get('records'), list):
        return jsonify({'error': '请求体必须包含 records 列表'}), 400
    items = data['records']
    if not items:
        return jsonify({'error': 'records 为空'}), 400
    if len(items) > current_app.config['HINTFLOW_MAX_RECORDS']:
        return jsonify({'error': f"records 超过上限 {current_app.config['HINTFLOW_MAX_RECORDS']}"}), 400
    try:
        records = [record_from_dict(item, i) for i, item in enumerate(items, start=1)]
        report, _ = corpus_metrics(records, _detector(data))
    except CorpusError as e:
        return jsonify({'error': str(e), 'index': e.line_no}), 400
    except (HintflowError, ValueError) as e:
        return jsonify({'error': str(e)}), 400
    except Exception as e:
        logger.exception("指标计算失败")
        return jsonify({'error': f'指标计算失败: {str(e)}'}), 500
    return jsonify(report.to_dict())
