# Copyright 2024 The Datatic Filtering Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import glob
import json
import os
import pandas as pd
import pytest
import yaml
from common.run_config import RunConfig
from estimation import cli
from estimation.config import PRESET_DIR, config_hash, load_config
from estimation.nn import NonFiniteError

SMALL_TRAIN = ['system.name=linear', 'daof.v1.window_length=3', 'daof.v1.hidden_layers=[8]',
               'train.critic_hidden_layers=[8]', 'train.horizon=30', 'train.warmup_steps=60',
               'train.warmup_episodes=2', 'train.max_steps=100', 'train.eval_interval=50',
               'train.eval_runs=2', 'train.eval_steps=30', 'train.batch_size=16',
               'train.buffer_size=1000']

SMALL_SLF = ['system.name=linear', 'filter.slf.window_length=3',
             'filter.slf.hidden_layers=[8]', 'filter.slf.epochs=2', 'filter.slf.transitions=40',
             'filter.slf.batch_size=8', 'train.horizon=30', 'train.eval_runs=2',
             'train.eval_steps=30']

SMALL_BENCH = ['bench.runs=2', 'bench.steps=20', 'bench.latency_calls=100',
               'bench.latency_warmup=5']


def _sets(overrides):
    args = []
    for override in overrides:
        args.extend(['--set', override])
    return args


def _snapshot(path):
    with open(path) as f:
        header = f.readline()
        return header.split(':', 1)[1].strip(), yaml.safe_load(f.read())


class PresetTest(object):

    def test_every_preset_resolves(self):
        presets = sorted(glob.glob(os.path.join(PRESET_DIR, '*.yaml')))
        assert len(presets) == 10
        for path in presets:
            load_config(path)

    def test_preset_found_by_name(self):
        assert load_config('exp2_bench.yaml')['system']['name'] == 'opaque_vehicle'

    def test_experiment_rosters(self):
        names = [e['name'] for e in load_config('exp1_bench.yaml')['bench']['roster']]
        assert names == ['UKF', 'PF', 'SLF', 'DAOF-v1', 'DAOF-v2']
        names = [e['name'] for e in load_config('exp2_bench.yaml')['bench']['roster']]
        assert names[:2] == ['SLF', 'DAOF-v2']


class ExitCodeTest(object):

    def test_missing_config_file(self, tmp_path):
        out = str(tmp_path / 'run')
        assert cli.main(['gen', '--config', 'no_such.yaml', '--out', out]) == cli.EXIT_CONFIG
        assert not os.path.exists(out)

    def test_unknown_key_fails_before_compute(self, tmp_path):
        out = str(tmp_path / 'run')
        code = cli.main(['gen', '--set', 'train.gama=0.9', '--out', out])
        assert code == cli.EXIT_CONFIG
        assert not os.path.exists(out)

    def test_v1_on_opaque_system(self, tmp_path):
        code = cli.main(['train', '--set', 'system.name=opaque_vehicle',
                         '--out', str(tmp_path)])
        assert code == cli.EXIT_CONFIG

    def test_missing_checkpoint(self, tmp_path):
        code = cli.main(['bench', '--config', 'linear_bench.yaml', '--out', str(tmp_path),
                         '--checkpoint_dir', str(tmp_path)] + _sets(SMALL_BENCH))
        assert code == cli.EXIT_IO

    def test_scenario_mismatch(self, tmp_path):
        code = cli.main(['bench', '--set', 'system.name=opaque_vehicle',
                         '--set', 'bench.roster=[{name: PF, kind: pf}]',
                         '--out', str(tmp_path)])
        assert code == cli.EXIT_CONFIG

    def test_eval_without_checkpoint(self, tmp_path):
        assert cli.main(['eval', '--out', str(tmp_path)]) == cli.EXIT_CONFIG

    @pytest.mark.parametrize('roster', [
        '[{name: X, kind: bogus}]',
        '[{name: S, kind: slf}]',
        '[{name: D, kind: daof}]',
        '[{name: KF, kind: kf}, {name: KF, kind: zoh}]',
    ])
    def test_bad_roster(self, tmp_path, roster):
        out = str(tmp_path / 'run')
        code = cli.main(['bench', '--set', 'system.name=linear',
                         '--set', 'bench.roster={}'.format(roster), '--out', out])
        assert code == cli.EXIT_CONFIG
        assert not os.path.exists(out)

    def test_sweep_name_clash(self, tmp_path):
        code = cli.main(['bench', '--set', 'system.name=linear',
                         '--set', 'bench.roster=[{name: PF-100, kind: zoh}]',
                         '--set', 'bench.pf_particle_sweep=[100]', '--out', str(tmp_path)])
        assert code == cli.EXIT_CONFIG

    def test_slf_training_divergence(self, tmp_path, monkeypatch):

        def diverging(*args, **kwargs):
            raise NonFiniteError('SLF loss became nan at update 3')

        monkeypatch.setattr(cli, 'train_slf', diverging)
        code = cli.main(['train', '--model', 'slf', '--out', str(tmp_path)] +
                        _sets(SMALL_SLF))
        assert code == cli.EXIT_DIVERGENCE

    def test_too_few_slf_transitions(self, tmp_path):
        code = cli.main(['train', '--model', 'slf', '--out', str(tmp_path)] +
                        _sets(SMALL_SLF + ['filter.slf.transitions=1']))
        assert code == cli.EXIT_CONFIG


class GenTest(object):

    def _gen(self, out, seed=3):
        return cli.main(['gen', '--config', 'linear_sanity.yaml', '--seed', str(seed),
                         '--set', 'gen.trajectories=3', '--set', 'system.steps=50',
                         '--out', out])

    def test_files_and_rows(self, tmp_path):
        out = str(tmp_path)
        assert self._gen(out) == cli.EXIT_OK
        paths = sorted(glob.glob(os.path.join(out, 'trajectory_*.csv')))
        assert len(paths) == 3
        for path in paths:
            with open(path) as f:
                assert len(f.readlines()) == 51
            frame = pd.read_csv(path)
            assert {'x_true_0', 'x_true_1', 'y_0'} <= set(frame.columns)

    def test_seed_reproducible(self, tmp_path):
        a, b, c = [str(tmp_path / name) for name in 'abc']
        self._gen(a)
        self._gen(b)
        self._gen(c, seed=4)
        name = 'trajectory_0001.csv'
        with open(os.path.join(a, name)) as f, open(os.path.join(b, name)) as g:
            assert f.read() == g.read()
        with open(os.path.join(a, name)) as f, open(os.path.join(c, name)) as g:
            assert f.read() != g.read()


class TrainTest(object):

    def test_daof_artifacts(self, tmp_path):
        out = str(tmp_path)
        code = cli.main(['train', '--out', out, '--set', 'train.gamma=0.5'] +
                        _sets(SMALL_TRAIN))
        assert code == cli.EXIT_OK
        digest, snapshot = _snapshot(os.path.join(out, 'config.yaml'))
        assert snapshot['train']['gamma'] == 0.5
        assert digest == config_hash(snapshot)
        assert os.path.exists(os.path.join(out, 'daof_v1.ckpt'))
        log = pd.read_csv(os.path.join(out, 'daof_v1_training_log.csv'))
        assert list(log['step']) == [0, 50, 100]

    def test_hash_stable_across_runs(self, tmp_path):
        a, b = str(tmp_path / 'a'), str(tmp_path / 'b')
        for out in [a, b]:
            cli.main(['gen', '--set', 'gen.trajectories=1', '--set', 'system.steps=5',
                      '--out', out])
        assert (_snapshot(os.path.join(a, 'config.yaml'))[0] ==
                _snapshot(os.path.join(b, 'config.yaml'))[0])

    def test_eval_trained_checkpoint(self, tmp_path):
        train_dir, eval_dir = str(tmp_path / 'train'), str(tmp_path / 'eval')
        assert cli.main(['train', '--out', train_dir] + _sets(SMALL_TRAIN)) == cli.EXIT_OK
        code = cli.main(['eval', '--out', eval_dir,
                         '--checkpoint', os.path.join(train_dir, 'daof_v1.ckpt')] +
                        _sets(SMALL_TRAIN + SMALL_BENCH))
        assert code == cli.EXIT_OK
        with open(os.path.join(eval_dir, 'report.json')) as f:
            report = json.load(f)
        assert [entry['name'] for entry in report['filters']] == ['DAOF-v1']
        digest, _ = _snapshot(os.path.join(eval_dir, 'config.yaml'))
        assert report['config_hash'] == digest
        curves = pd.read_csv(os.path.join(eval_dir, 'plots', 'training_curves.csv'))
        assert set(curves['label']) == {'DAOF-v1'}
        assert list(curves.columns) == ['label', 'step', 'eval_rmse_0', 'eval_rmse_1',
                                        'wall_ms']
        assert list(curves['step']) == [0, 50, 100]

    def test_slf_budget_follows_daof_checkpoint(self, tmp_path):
        daof_dir, slf_dir = str(tmp_path / 'daof'), str(tmp_path / 'slf')
        assert cli.main(['train', '--out', daof_dir] + _sets(SMALL_TRAIN)) == cli.EXIT_OK
        code = cli.main(['train', '--model', 'slf', '--out', slf_dir,
                         '--checkpoint', os.path.join(daof_dir, 'daof_v1.ckpt')] +
                        _sets(SMALL_SLF))
        assert code == cli.EXIT_OK
        log = pd.read_csv(os.path.join(slf_dir, 'slf_training_log.csv'))
        assert list(log['step']) == [50, 100]

    def test_slf_on_generated_dataset(self, tmp_path):
        data_dir, out = str(tmp_path / 'data'), str(tmp_path / 'slf')
        cli.main(['gen', '--set', 'system.name=linear', '--set', 'gen.trajectories=3',
                  '--set', 'system.steps=30', '--out', data_dir])
        code = cli.main(['train', '--model', 'slf', '--out', out,
                         '--set', 'filter.slf.dataset_dir={}'.format(data_dir)] +
                        _sets(SMALL_SLF))
        assert code == cli.EXIT_OK
        assert os.path.exists(os.path.join(out, 'slf.ckpt'))
        log = pd.read_csv(os.path.join(out, 'slf_training_log.csv'))
        assert list(log.columns) == ['step', 'episode', 'train_loss', 'eval_rmse_0',
                                     'eval_rmse_1', 'wall_ms']
        assert list(log['step']) == [20, 40]

    def test_empty_dataset_dir(self, tmp_path):
        code = cli.main(['train', '--model', 'slf', '--out', str(tmp_path / 'slf'),
                         '--set', 'filter.slf.dataset_dir={}'.format(tmp_path)] +
                        _sets(SMALL_SLF))
        assert code == cli.EXIT_IO


class BenchTest(object):

    def test_linear_roster(self, tmp_path):
        out = str(tmp_path)
        code = cli.main(['bench', '--set', 'system.name=linear', '--threads', '2',
                         '--set', 'bench.roster=[{name: KF, kind: kf}, {name: ZOH, kind: zoh}]',
                         '--runs', '2', '--steps', '20', '--set', 'bench.latency_calls=100',
                         '--out', out])
        assert code == cli.EXIT_OK
        table = pd.read_csv(os.path.join(out, 'table.csv'))
        assert list(table['filter']) == ['KF', 'ZOH']
        assert len(glob.glob(os.path.join(out, 'raw', '*.csv'))) == 4


class RunConfigTest(object):

    def test_default_root(self, tmp_path):
        run = RunConfig.make('bench', base=str(tmp_path))
        assert os.path.isdir(run.root_path)
        assert os.path.basename(run.root_path) == 'bench_' + run.timestamp()
        assert run.start_time.tzinfo is not None

    def test_explicit_root(self, tmp_path):
        run = RunConfig.make('gen', out=str(tmp_path / 'x'))
        assert run.path('a.csv') == os.path.join(str(tmp_path / 'x'), 'a.csv')
