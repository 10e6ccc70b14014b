# -*- coding: utf-8 -*-
"""奖励评分服务入口"""

from hintflow.flask_app import create_app
from hintflow.utils.harness import setup_logging

setup_logging()

app = create_app()

if __name__ == '__main__':
    app.run(host='0.0.0.0', port=5000)
