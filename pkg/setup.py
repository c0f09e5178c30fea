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

import setuptools

package = __import__('estimation')

DEPENDENCIES = [
    "numpy>=1.20",
    "scipy>=1.6",
    "pandas>=1.2",
    "pyyaml>=5.1",
    "pytz",
]

setuptools.setup(
    name='datatic_filtering',
    version=package.__version__,
    author=package.__author__,
    author_email=package.__email__,
    description=package.__doc__.strip(),
    package_data={
        'estimation': ['data/*.yaml'],
    },
    packages=[
        'common',
        'estimation',
        'estimation.daof',
        'estimation.filters',
        'estimation.metrics',
        'estimation.nn',
        'estimation.systems',
    ],
    install_requires=DEPENDENCIES,
    extras_require={'test': ['pytest']},
    entry_points={
        'console_scripts': ['daof-lab=estimation.cli:main'],
    },
    python_requires='>=3.7',
)
