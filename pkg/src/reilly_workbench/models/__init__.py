"""データモデル定義"""