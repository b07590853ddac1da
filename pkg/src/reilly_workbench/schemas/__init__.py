"""シナリオ設定・レポートのスキーマ定義"""