# -*- coding: utf-8 -*-
"""运行配置加载与校验测试"""

import json

import pytest
import yaml

from hintflow.utils.config import load_config, load_presets, PRESET_NAMES
from hintflow.utils.errors import ConfigFileNotFound, ConfigSyntaxError, ConfigValidationError


def write_yaml(tmp_path, data, name='config.yaml'):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data, allow_unicode=True), encoding='utf-8')
    return str(path)


class TestDefaults:
    def test_minimal_config(self, tmp_path):
        config = load_config(write_yaml(tmp_path, {'steps': 5}))
        assert config.steps == 5
        assert config.hyper.clip_eps == 0.2 and config.hyper.kl_beta == 0.0
        assert config.hyper.group_size == 8 and config.hyper.tau == 0.4
        assert config.schedule.kind == 'cosine' and config.schedule.horizon_T == 900
        assert config.hyper.alpha == 0.9
        assert config.arena.language_ids == ['en', 'de', 'ja', 'zh', 'th', 'sw']
        assert [g.id for g in config.groups] == ['high', 'mid', 'low']
        assert config.require_lc is True

    def test_no_file(self):
        config = load_config()
        assert config.steps == 600 and config.seed == 0

    def test_seed_override(self):
        assert load_config(overrides={'seed': 7, 'steps': None}).seed == 7

    def test_json_config(self, tmp_path):
        path = tmp_path / 'config.json'
        path.write_text(json.dumps({'steps': 3, 'hyper': {'lr': 0.5}}), encoding='utf-8')
        config = load_config(str(path))
        assert config.steps == 3 and config.hyper.lr == 0.5

    def test_sha_stable(self, tmp_path):
        path = write_yaml(tmp_path, {'steps': 5})
        assert load_config(path).sha256() == load_config(path).sha256()
        assert load_config(path).sha256() != load_config(path, overrides={'seed': 1}).sha256()


class TestPresets:
    def test_all_presets_load(self):
        assert set(load_presets()) == set(PRESET_NAMES)
        for name in PRESET_NAMES:
            assert load_config(preset=name).preset == name

    def test_preset_values(self):
        assert load_config(preset='vanilla').hyper.tau == 0.0
        fixed = load_config(preset='fixed-hint')
        assert fixed.schedule.kind == 'constant' and fixed.hyper.tau == 1.5
        assert load_config(preset='cosine').hyper.tau == 1.5
        assert load_config(preset='lang').hyper.tau == 0.4

    def test_user_file_over_preset(self, tmp_path):
        config = load_config(write_yaml(tmp_path, {'hyper': {'tau': 0.6}}), preset='lang')
        assert config.hyper.tau == 0.6

    def test_unknown_preset(self):
        with pytest.raises(ConfigValidationError) as info:
            load_config(preset='nope')
        assert info.value.key == 'preset'


class TestValidation:
    def test_large_tau_accepted(self, tmp_path):
        assert load_config(write_yaml(tmp_path, {'hyper': {'tau': 1.5}})).hyper.tau == 1.5

    def test_zero_eps_rejected(self, tmp_path):
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'hyper': {'clip_eps': 0.0}}))
        assert info.value.key == 'hyper.clip_eps'

    def test_kl_rejected(self, tmp_path):
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'hyper': {'kl_beta': 0.1}}))
        assert info.value.key == 'hyper.kl_beta'

    def test_unknown_keys(self, tmp_path):
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'hyper': {'foo': 1}}))
        assert info.value.key == 'hyper.foo'
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'bogus': 1}, 'other.yaml'))
        assert info.value.key == 'bogus'

    def test_overlapping_groups(self, tmp_path):
        groups = {'high': ['en', 'de', 'ja'], 'mid': ['ja', 'zh'], 'low': ['th', 'sw']}
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'groups': groups}))
        assert info.value.key == 'groups'

    def test_minibatch_must_divide(self, tmp_path):
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'batch_tasks': 3, 'minibatch': 4, 'hyper': {'group_size': 2}}))
        assert info.value.key == 'minibatch'

    def test_bad_pivot(self, tmp_path):
        with pytest.raises(ConfigValidationError) as info:
            load_config(write_yaml(tmp_path, {'arena': {'pivot': 'fr'}}))
        assert info.value.key == 'arena'


class TestFiles:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileNotFound):
            load_config(str(tmp_path / 'none.yaml'))

    def test_bad_syntax(self, tmp_path):
        path = tmp_path / 'bad.yaml'
        path.write_text('steps: [1, 2\n', encoding='utf-8')
        with pytest.raises(ConfigSyntaxError):
            load_config(str(path))

    def test_non_mapping(self, tmp_path):
        path = tmp_path / 'list.yaml'
        path.write_text('- 1\n- 2\n', encoding='utf-8')
        with pytest.raises(ConfigSyntaxError):
            load_config(str(path))
