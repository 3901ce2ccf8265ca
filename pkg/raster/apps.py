from django.apps import AppConfig


class RasterConfig(AppConfig):
    name = "raster"
    verbose_name = "Image planes and file I/O"
