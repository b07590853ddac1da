"""ユーティリティテスト"""
