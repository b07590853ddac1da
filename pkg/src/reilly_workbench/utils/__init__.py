"""ユーティリティ関数"""