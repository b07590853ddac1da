"""計算エンジンテスト"""