"""
Numerical settings for the barrier apps.

``DEFAULTS`` below is the only place the defaults are written down. A
project overrides them through ``BARRIERS`` in its settings, e.g.:

BARRIERS = {
    'RANK_TOLERANCE': 1e-8,
    'AD_CHUNK_SIZE': 4,
}

``core.settings`` fills ``BARRIERS`` from ``BARRIER_<NAME>`` environment
variables. Overrides given as strings are coerced to the type of the
default. Read values as ``barrier_settings.RANK_TOLERANCE``.
"""
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.core.signals import setting_changed
from rest_framework.settings import APISettings

DEFAULTS = {
    'RANK_TOLERANCE': 1e-6,
    'ZERO_TOLERANCE': 1e-10,
    'GRADIENT_TOLERANCE': 1e-8,
    'PSEUDO_INVERSE_CUTOFF': 1e-8,
    'LG_NORM_FLOOR': 1e-12,
    'INERTIA_CONDITION_LIMIT': 1e12,
    'RANK_DOMAIN_INFLATION': 0.05,
    'D1_INFLATION': 0.2,
    'SAFE_SET_INFLATION': 0.05,
    'AD_CHUNK_SIZE': 1,
    'REFINE_ROUNDS': 10,
    'REFINE_SAMPLES': 64,
    'GRADIENT_SAMPLES': 2000,
    'CBF_SAMPLES': 2000,
    'RANK_SAMPLES': 400,
    'DEFAULT_DT': 1e-3,
    'DEFAULT_HORIZON': 10.0,
    'INVARIANCE_TOLERANCE': 1e-3,
    'VELOCITY_LIMIT': 2.0,
    'MAX_WITNESSES': 10,
}


def _coerce(name, value):
    if name not in DEFAULTS:
        raise ImproperlyConfigured(f'Unknown barrier setting {name!r}.')
    try:
        return type(DEFAULTS[name])(value)
    except (TypeError, ValueError):
        raise ImproperlyConfigured(f'Barrier setting {name} cannot be read from {value!r}.')


class BarrierSettings(APISettings):
    @property
    def user_settings(self):
        if not hasattr(self, '_user_settings'):
            overrides = getattr(settings, 'BARRIERS', {})
            self._user_settings = {name: _coerce(name, value) for name, value in overrides.items()}
        return self._user_settings


barrier_settings = BarrierSettings(None, DEFAULTS)


def reload_barrier_settings(*args, **kwargs):
    if kwargs['setting'] == 'BARRIERS':
        barrier_settings.reload()


setting_changed.connect(reload_barrier_settings)
