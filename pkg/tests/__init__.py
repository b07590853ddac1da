"""テストパッケージ"""