from django.apps import AppConfig


class EstimationConfig(AppConfig):
    name = "estimation"
    verbose_name = "Scatter and factor estimation"
