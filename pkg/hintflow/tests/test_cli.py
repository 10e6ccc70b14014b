# -*- coding: utf-8 -*-
"""命令行测试"""

import json
import os

import yaml
from click.testing import CliRunner

from hintflow.cli import main

FIXTURE = os.path.join(os.path.dirname(__file__), 'data', 'fixture_corpus.jsonl')

SMALL = {
    'steps': 2,
    'batch_tasks': 2,
    'minibatch': 2,
    'eval_every': 1,
    'eval_tasks': 4,
    'train_tasks': 10,
    'hyper': {'group_size': 2},
    'arena': {
        'languages': [{'id': 'en', 'vocab_size': 3}, {'id': 'sw', 'vocab_size': 3}],
        'pivot': 'en',
        'tiers': [{'name': 'low', 'offset': 0.0}],
        'K': 3,
        'families': 1,
        'm': 2,
        'teacher_len': 4,
    },
    'groups': {'high': ['en'], 'mid': [], 'low': ['sw']},
}


class TestSchedulePreview:
    def test_csv(self):
        result = CliRunner().invoke(main, ['schedule-preview', '--kind', 'linear', '--horizon', '4', '--steps', '4'])
        assert result.exit_code == 0, result.output
        lines = result.output.strip().split('\n')
        assert lines == ['t,p', '0,1', '1,0.75', '2,0.5', '3,0.25', '4,0']

    def test_invalid_horizon(self):
        result = CliRunner().invoke(main, ['schedule-preview', '--horizon', '0', '--steps', '3'])
        assert result.exit_code != 0


class TestEvalFile:
    def test_fixture(self, tmp_path):
        per_record = str(tmp_path / 'verdicts.jsonl')
        result = CliRunner().invoke(main, ['eval-file', FIXTURE, '--per-record', per_record])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report['lcr'] == 0.4 and report['count'] == 5
        assert os.path.exists(per_record)

    def test_empty_corpus(self, tmp_path):
        path = tmp_path / 'empty.jsonl'
        path.write_text('', encoding='utf-8')
        result = CliRunner().invoke(main, ['eval-file', str(path)])
        assert result.exit_code != 0
        assert '语料为空' in result.output


class TestTrainAndExport:
    def test_train_export_eval(self, tmp_path):
        config = tmp_path / 'small.yaml'
        config.write_text(yaml.safe_dump(SMALL), encoding='utf-8')
        run_dir = str(tmp_path / 'run')
        runner = CliRunner()

        result = runner.invoke(main, ['train', '--config', str(config), '--out', run_dir, '--no-progress'])
        assert result.exit_code == 0, result.output
        assert os.path.exists(os.path.join(run_dir, 'policy.ckpt'))

        result = runner.invoke(main, ['export-csv', '--run', run_dir, '--fields', 'step,mean_reward'])
        assert result.exit_code == 0, result.output
        assert result.output.split('\n')[0] == 'step,mean_reward'

        result = runner.invoke(main, ['eval', '--checkpoint', os.path.join(run_dir, 'policy.ckpt'),
                                      '--config', str(config)])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)['count'] == 4

    def test_missing_config(self, tmp_path):
        result = CliRunner().invoke(main, ['train', '--config', str(tmp_path / 'none.yaml'), '--no-progress'])
        assert result.exit_code != 0
        assert 'none.yaml' in result.output
