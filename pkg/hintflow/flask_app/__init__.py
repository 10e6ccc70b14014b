# -*- coding: utf-8 -*-
from flask import Flask


def create_app(test_config=None):
    app = Flask(__name__)
    app.config.update(
        # 默认语言识别器：script / langdetect
        HINTFLOW_DETECTOR='script',
        # /api/metrics 单次请求的记录上限
        HINTFLOW_MAX_RECORDS=10000,
    )
    if test_config:
        app.config.update(test_config)
    app.json.ensure_ascii = False

    from .views import reward
    app.register_blueprint(reward.rw)

    return app
