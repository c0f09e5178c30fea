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

import datetime
import logging
import os
import pytz


class RunConfig(object):
    """Where one CLI invocation writes its artifacts."""

    def __init__(self, start_time, job, root_path):
        self.start_time = start_time
        self.job = job
        self.root_path = root_path

    def path(self, *parts):
        return os.path.join(self.root_path, *parts)

    def timestamp(self):
        return self.start_time.strftime('%Y%m%dT%H%M%S')

    def ensure(self):
        if not os.path.exists(self.root_path):
            os.makedirs(self.root_path)
        return self

    @staticmethod
    def make(job, out=None, base='runs'):
        """ `out` when given, else `<base>/<job>_<UTC timestamp>`. """
        now = datetime.datetime.now(pytz.utc)
        if out:
            root_path = out
        else:
            root_path = os.path.join(base, '%s_%s' % (job, now.strftime('%Y%m%dT%H%M%S')))
        logging.info('Writing %s outputs to %s', job, root_path)
        return RunConfig(now, job, root_path).ensure()
