"""コマンドラインテスト"""
