from copy import deepcopy
from typing import Dict, List

from src.models.experiment import ExperimentConfig

EXPERIMENT1_MIXING = [
    [0.9202, -0.3396, 0.8531],
    [0.6021, -0.7977, 0.2639],
    [-0.0648, -0.3944, -0.0117],
    [0.3877, -0.5301, -0.5394],
]
EXPERIMENT1_SOURCES = [
    {'kind': 'ar1', 'a': 0.84},
    {'kind': 'ar1', 'a': 0.21},
    {'kind': 'ar1', 'a': -0.57},
]
EXPERIMENT2_MIXING = [
    [-0.7270, -2.1943],
    [-0.0249, 0.8741],
    [-1.2327, 0.8559],
    [0.5638, 0.0343],
    [1.0297, -0.7223],
]
# LED -> photodiode gains of the indoor VLC link, in units of 1e-6
EXPERIMENT3_CHANNEL = [
    [1.820, 1.720],
    [1.720, 1.820],
    [1.628, 1.720],
    [1.720, 1.628],
]
TELEGRAPH_SOURCES = [
    {'kind': 'telegraph', 'switch_probability': 0.25},
    {'kind': 'telegraph', 'switch_probability': 0.75},
]

PRESETS: Dict[str, dict] = {
    'exp1a': {
        'name': 'exp1a',
        'dims': {'M': 3, 'L': 4, 'T': 1000},
        'mixing': EXPERIMENT1_MIXING,
        'noise': {'variance': 0.001},
        'sources': EXPERIMENT1_SOURCES,
        'trials': 1000,
        'seed': 2018,
    },
    'exp1b': {
        'name': 'exp1b',
        'dims': {'M': 3, 'L': 4, 'T': 1000},
        'mixing': EXPERIMENT1_MIXING,
        'noise': {'variances_db': [-20.0, -25.0, -30.0, -35.0]},
        'sources': EXPERIMENT1_SOURCES,
        'trials': 100,
        'seed': 2018,
        'T_grid': [250, 500, 1000, 2000],
    },
    'exp2': {
        'name': 'exp2',
        'dims': {'M': 2, 'L': 5, 'T': 250},
        'mixing': EXPERIMENT2_MIXING,
        'noise': {'variance': 1.0},
        'sources': EXPERIMENT1_SOURCES[1:],
        'trials': 1000,
        'seed': 2018,
    },
    'exp3': {
        'name': 'exp3',
        'dims': {'M': 2, 'L': 4, 'T': 256},
        'mixing': [[gain * 1e-6 for gain in row] for row in EXPERIMENT3_CHANNEL],
        'noise': {'snr_db': [float(snr) for snr in range(-20, 11, 2)]},
        'sources': TELEGRAPH_SOURCES,
        'trials': 2000,
        'seed': 2018,
        'scoring': {'common_noise': True},
    },
    'qml': {
        'name': 'qml',
        'dims': {'M': 2, 'L': 5, 'T': 256},
        'mixing': EXPERIMENT2_MIXING,
        'noise': {'variance': 1.0},
        'sources': TELEGRAPH_SOURCES,
        'trials': 200,
        'seed': 2018,
        'T_grid': [256, 4096],
    },
}

EXPERIMENT_NAMES: List[str] = ['exp1a', 'exp1b', 'exp2', 'exp3', 'qml']


def preset_document(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f'unknown preset {name!r}; choose one of {", ".join(sorted(PRESETS))}')
    return deepcopy(PRESETS[name])


def get_preset(name: str) -> ExperimentConfig:
    return ExperimentConfig.parse_obj(preset_document(name))
