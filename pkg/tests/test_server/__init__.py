"""MCPサーバーのテスト"""
