from django.apps import AppConfig


class LieConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lie'
    verbose_name = 'Lie derivatives and relative degree'
