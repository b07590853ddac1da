"""幾何・検証の計算エンジン"""