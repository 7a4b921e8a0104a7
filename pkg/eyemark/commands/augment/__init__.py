from .augment import Augment
from app import EyemarkApp

# EyemarkApp.load_commands がこのモジュールを読み込むために必要
def setup(app : EyemarkApp):
    app.add_command(Augment(app))
