from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, override_settings

from .conf import DEFAULTS, barrier_settings


class BarrierSettingsTests(SimpleTestCase):
    @override_settings(BARRIERS={})
    def test_defaults_come_from_conf(self):
        for name, value in DEFAULTS.items():
            with self.subTest(name=name):
                self.assertEqual(getattr(barrier_settings, name), value)

    def test_project_settings_only_hold_overrides(self):
        self.assertLessEqual(set(settings.BARRIERS), set(DEFAULTS))

    @override_settings(BARRIERS={'RANK_TOLERANCE': '1e-3', 'CBF_SAMPLES': '50'})
    def test_string_overrides_take_the_default_type(self):
        self.assertEqual(barrier_settings.RANK_TOLERANCE, 1e-3)
        self.assertIsInstance(barrier_settings.CBF_SAMPLES, int)
        self.assertEqual(barrier_settings.CBF_SAMPLES, 50)
        self.assertEqual(barrier_settings.ZERO_TOLERANCE, DEFAULTS['ZERO_TOLERANCE'])

    def test_reloads_when_overridden(self):
        with self.settings(BARRIERS={'MAX_WITNESSES': 3}):
            self.assertEqual(barrier_settings.MAX_WITNESSES, 3)
        restored = settings.BARRIERS.get('MAX_WITNESSES', DEFAULTS['MAX_WITNESSES'])
        self.assertEqual(barrier_settings.MAX_WITNESSES, int(restored))

    @override_settings(BARRIERS={'RANK_TOLERENCE': 1e-3})
    def test_unknown_override_is_rejected(self):
        with self.assertRaises(ImproperlyConfigured):
            barrier_settings.RANK_TOLERANCE

    @override_settings(BARRIERS={'REFINE_ROUNDS': 'many'})
    def test_unreadable_override_is_rejected(self):
        with self.assertRaises(ImproperlyConfigured):
            barrier_settings.REFINE_ROUNDS
