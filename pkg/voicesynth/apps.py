from django.apps import AppConfig


class VoicesynthConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'voicesynth'
    verbose_name = 'Singing voice synthesis'
