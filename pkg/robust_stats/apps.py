from django.apps import AppConfig


class RobustStatsConfig(AppConfig):
    name = "robust_stats"
    verbose_name = "Robust estimators"
