# -*- coding: utf-8 -*-
"""
数值验证分析包：能量方程、Ladyzhenskaya 不等式、Grönwall 稳定性、
人造解与收敛性研究
"""
