from .preprocess import Preprocess
from app import EyemarkApp

# EyemarkApp.load_commands がこのモジュールを読み込むために必要
def setup(app : EyemarkApp):
    app.add_command(Preprocess(app))
